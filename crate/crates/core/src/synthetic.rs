//! A seeded generator for a small Vietnamese-style NER corpus and matching
//! toy word vectors.
//!
//! Sentences come from fixed templates with entity slots. Multi-syllable
//! words are joined with underscores, as in word-segmented Vietnamese text.
//! Each entity type has trigger words nearby ("ông", "tại", "Công_ty", ...),
//! so every variant can learn the task. A few entity names are held out of
//! the training split and only appear in dev and test. The toy vectors
//! cluster entity words by type, which gives the pretrained variants an
//! edge on those held-out names.

use std::fmt::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{EntityType, WordLabel, WordSentence, WordToken};
use crate::embeddings::{init_bound, word_key, EmbeddingTable, Vocabulary};
use crate::error::Result;
use crate::numerics::Matrix;

const SURNAMES: [&str; 12] = [
    "Nguyễn", "Trần", "Lê", "Phạm", "Hoàng", "Huỳnh", "Phan", "Vũ", "Võ", "Đặng", "Bùi", "Đỗ",
];
const MIDDLE: [&str; 6] = ["Văn", "Thị", "Minh", "Đức", "Thu", "Quốc"];
const GIVEN: [&str; 16] = [
    "An", "Bình", "Cường", "Dũng", "Hà", "Hải", "Hùng", "Lan", "Linh", "Nam", "Phong", "Quân", "Sơn", "Tâm", "Tuấn",
    "Vy",
];

const LOCATIONS: [&str; 24] = [
    "Hà_Nội",
    "Huế",
    "Đà_Nẵng",
    "Cần_Thơ",
    "Hải_Phòng",
    "Nha_Trang",
    "Đà_Lạt",
    "Vũng_Tàu",
    "Quảng_Ninh",
    "Nghệ_An",
    "Thanh_Hóa",
    "Bình_Dương",
    "Long_An",
    "Lào_Cai",
    "Sơn_La",
    "Cà_Mau",
    "Bến_Tre",
    "Hội_An",
    "Phú_Quốc",
    "Sa_Pa",
    "thành_phố Hồ_Chí_Minh",
    "sông Hồng",
    "hồ Gươm",
    "Việt_Nam",
];
const HELD_OUT_LOCATIONS: [&str; 3] = ["Kon_Tum", "Gia_Lai", "Yên_Bái"];

const ORGANIZATIONS: [&str; 18] = [
    "Công_ty FPT",
    "Tập_đoàn Viettel",
    "Công_ty Vinamilk",
    "Đại_học Bách_khoa",
    "Đại_học Ngoại_thương",
    "Tổng_công_ty Sông_Đà",
    "Tập_đoàn Hòa_Phát",
    "Báo Tuổi_Trẻ",
    "Báo Thanh_Niên",
    "Bộ Y_tế",
    "Bộ Giáo_dục",
    "Ngân_hàng Vietcombank",
    "Tập_đoàn Petrolimex",
    "UBND",
    "Quốc_hội",
    "Liên_Hợp_Quốc",
    "Ngân_hàng Nhà_nước Việt_Nam",
    "Đài Truyền_hình Việt_Nam",
];
const HELD_OUT_ORGANIZATIONS: [&str; 2] = ["Công_ty Masan", "Tập_đoàn Vingroup"];

const MISCELLANEOUS: [&str; 14] = [
    "Tết",
    "SEA_Games",
    "World_Cup",
    "Phật_giáo",
    "Công_giáo",
    "iPhone",
    "Facebook",
    "Euro",
    "Olympic",
    "Trung_thu",
    "Cúp Quốc_gia",
    "Lễ_hội Đền_Hùng",
    "Giải Bóng_đá Đông_Nam_Á",
    "AFF_Cup",
];
const HELD_OUT_MISCELLANEOUS: [&str; 2] = ["Halloween", "Giáng_sinh"];

/// `{P}`, `{L}`, `{O}`, `{M}` are entity slots, `{N}` a number.
const TEMPLATES: [&str; 24] = [
    "Ông {P} đã đến {L} vào năm {N} .",
    "Bà {P} hiện là giám_đốc {O} .",
    "Theo ông {P} , {O} sẽ mở chi_nhánh mới tại {L} .",
    "Người_dân {L} đón {M} trong không_khí vui_vẻ .",
    "{O} vừa công_bố lợi_nhuận quý {N} tăng {N} % .",
    "Hôm_qua , anh {P} đã giành huy_chương vàng tại {M} .",
    "Chị {P} làm_việc cho {O} từ năm {N} .",
    "Thời_tiết hôm_nay rất đẹp .",
    "Giá xăng tăng {N} đồng mỗi lít .",
    "{O} có trụ_sở chính ở {L} .",
    "Nhiều du_khách đến {L} dịp {M} .",
    "Phóng_viên {O} đã phỏng_vấn ông {P} .",
    "Cuộc họp diễn ra tại {L} với sự tham_gia của {N} đại_biểu .",
    "Sinh_viên {O} tham_gia {M} năm nay .",
    "Anh {P} sinh ra ở {L} và lớn lên ở {L} .",
    "Chúng_tôi sẽ trở_lại vào tuần sau .",
    "Theo {O} , số ca mắc mới là {N} .",
    "Bộ_trưởng {P} thăm {L} hôm {N} .",
    "Ca_sĩ {P} biểu_diễn tại {M} .",
    "Đội_tuyển {L} thắng {N} - {N} tại {M} .",
    "Bà {P} cho biết {O} cần thêm {N} kỹ_sư .",
    "Mưa lớn kéo_dài ở {L} suốt {N} ngày .",
    "Ông {P} và bà {P} cùng dự {M} ở {L} .",
    "Sản_phẩm mới của {O} được bán tại {L} .",
];

/// Tags of the extra columns written by [`write_toy_conll`].
const POS_OTHER: &str = "N";
const POS_ENTITY: &str = "Np";
const POS_NUMBER: &str = "M";
const POS_PUNCT: &str = "CH";

/// Names available for one entity type in one split.
#[derive(Debug, Clone)]
struct Pool {
    common: Vec<String>,
    held_out: Vec<String>,
}

impl Pool {
    fn pick(&self, rng: &mut ChaCha8Rng, allow_held_out: bool) -> &str {
        if allow_held_out && !self.held_out.is_empty() && rng.random_bool(0.04) {
            self.held_out.choose(rng).unwrap()
        } else {
            self.common.choose(rng).unwrap()
        }
    }
}

fn person_pool(rng: &mut ChaCha8Rng) -> Pool {
    let mut names = Vec::new();
    while names.len() < 70 {
        let s = SURNAMES.choose(rng).unwrap();
        let m = MIDDLE.choose(rng).unwrap();
        let g = GIVEN.choose(rng).unwrap();
        // One name in five is written as two words.
        let name = if rng.random_bool(0.2) {
            format!("{s} {m}_{g}")
        } else {
            format!("{s}_{m}_{g}")
        };
        if !names.contains(&name) {
            names.push(name);
        }
    }
    let held_out = names.split_off(62);
    Pool { common: names, held_out }
}

fn pool(common: &[&str], held_out: &[&str]) -> Pool {
    Pool {
        common: common.iter().map(|s| s.to_string()).collect(),
        held_out: held_out.iter().map(|s| s.to_string()).collect(),
    }
}

/// Seed, split sizes and vector dimension of the corpus bundled under
/// `data/toy/`.
pub const BUNDLED_SEED: u64 = 2024;
pub const BUNDLED_SIZES: (usize, usize, usize) = (500, 100, 100);
pub const BUNDLED_EMBEDDING_DIM: usize = 50;

/// A generated corpus with its splits.
#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub train: Vec<WordSentence>,
    pub dev: Vec<WordSentence>,
    pub test: Vec<WordSentence>,
    /// Every entity name the generator can emit, by type.
    pub lexicon: Vec<(EntityType, String)>,
}

struct Generator {
    per: Pool,
    loc: Pool,
    org: Pool,
    misc: Pool,
}

impl Generator {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        Generator {
            per: person_pool(rng),
            loc: pool(&LOCATIONS, &HELD_OUT_LOCATIONS),
            org: pool(&ORGANIZATIONS, &HELD_OUT_ORGANIZATIONS),
            misc: pool(&MISCELLANEOUS, &HELD_OUT_MISCELLANEOUS),
        }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, allow_held_out: bool) -> WordSentence {
        let template = TEMPLATES.choose(rng).unwrap();
        let mut tokens = Vec::new();
        for slot in template.split(' ') {
            let (ty, pool) = match slot {
                "{P}" => (EntityType::Per, &self.per),
                "{L}" => (EntityType::Loc, &self.loc),
                "{O}" => (EntityType::Org, &self.org),
                "{M}" => (EntityType::Misc, &self.misc),
                "{N}" => {
                    tokens.push(WordToken::new(rng.random_range(1..=2020).to_string(), WordLabel::Outside));
                    continue;
                }
                word => {
                    tokens.push(WordToken::new(word, WordLabel::Outside));
                    continue;
                }
            };
            for (i, word) in pool.pick(rng, allow_held_out).split(' ').enumerate() {
                let label = if i == 0 { WordLabel::Begin(ty) } else { WordLabel::Inside(ty) };
                tokens.push(WordToken::new(word, label));
            }
        }
        WordSentence::new(tokens)
    }

    fn lexicon(&self) -> Vec<(EntityType, String)> {
        let mut out = Vec::new();
        for (ty, pool) in [
            (EntityType::Per, &self.per),
            (EntityType::Loc, &self.loc),
            (EntityType::Org, &self.org),
            (EntityType::Misc, &self.misc),
        ] {
            for name in pool.common.iter().chain(&pool.held_out) {
                out.push((ty, name.clone()));
            }
        }
        out
    }
}

/// Generates `n_train`, `n_dev` and `n_test` sentences. Held-out names
/// appear only in dev and test.
pub fn generate(seed: u64, n_train: usize, n_dev: usize, n_test: usize) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Generator::new(&mut rng);
    let train = (0..n_train).map(|_| g.sentence(&mut rng, false)).collect();
    let dev = (0..n_dev).map(|_| g.sentence(&mut rng, true)).collect();
    let test = (0..n_test).map(|_| g.sentence(&mut rng, true)).collect();
    ToyCorpus {
        train,
        dev,
        test,
        lexicon: g.lexicon(),
    }
}

/// Every distinct word the generator can emit, in first-seen order.
fn all_words(lexicon: &[(EntityType, String)]) -> (Vocabulary, Vec<Option<EntityType>>) {
    let mut vocab = Vocabulary::new();
    let mut types = vec![None; vocab.len()];
    for (ty, name) in lexicon {
        for w in name.split(' ') {
            let before = vocab.len();
            vocab.insert(&word_key(w));
            if vocab.len() > before {
                types.push(Some(*ty));
            }
        }
    }
    for t in TEMPLATES {
        for w in t.split(' ').filter(|w| !w.starts_with('{')) {
            let before = vocab.len();
            vocab.insert(&word_key(w));
            if vocab.len() > before {
                types.push(None);
            }
        }
    }
    (vocab, types)
}

/// Toy "pretrained" vectors for every generator word. Words of one entity
/// type lie near a shared random centroid; other words are uniform noise.
pub fn toy_embeddings(corpus: &ToyCorpus, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let (vocab, types) = all_words(&corpus.lexicon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = init_bound(dim);
    let centroids: Vec<Vec<f64>> = (0..EntityType::ALL.len())
        .map(|_| (0..dim).map(|_| rng.random_range(-bound..=bound)).collect())
        .collect();
    let mut vectors = Matrix::zeros(vocab.len(), dim);
    for (id, ty) in types.iter().enumerate() {
        let row = vectors.row_mut(id);
        match ty {
            Some(t) => {
                let c = &centroids[EntityType::ALL.iter().position(|x| x == t).unwrap()];
                for (v, cv) in row.iter_mut().zip(c) {
                    *v = cv + 0.3 * rng.random_range(-bound..=bound);
                }
            }
            None => row.iter_mut().for_each(|v| *v = rng.random_range(-bound..=bound)),
        }
        // Six decimals keep the text file small and make it load back exactly.
        row.iter_mut().for_each(|v| *v = (*v * 1e6).round() / 1e6);
    }
    EmbeddingTable::new(vocab, vectors, true)
}

/// The corpus and vectors shipped under `data/toy/`.
pub fn bundled() -> Result<(ToyCorpus, EmbeddingTable)> {
    let (n_train, n_dev, n_test) = BUNDLED_SIZES;
    let corpus = generate(BUNDLED_SEED, n_train, n_dev, n_test);
    let vectors = toy_embeddings(&corpus, BUNDLED_EMBEDDING_DIM, BUNDLED_SEED + 1)?;
    Ok((corpus, vectors))
}

/// Writes sentences as five whitespace-separated columns:
/// `word POS chunk NE nested-NE`, blank line between sentences.
pub fn write_toy_conll(sentences: &[WordSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for t in &s.tokens {
            let label = t.gold_label.unwrap_or(WordLabel::Outside);
            let (pos, chunk) = match label {
                WordLabel::Begin(_) => (POS_ENTITY, "B-NP"),
                WordLabel::Inside(_) => (POS_ENTITY, "I-NP"),
                WordLabel::Outside if t.surface.chars().all(|c| c.is_ascii_digit()) => (POS_NUMBER, "B-NP"),
                WordLabel::Outside if !t.surface.chars().any(char::is_alphanumeric) => (POS_PUNCT, "O"),
                WordLabel::Outside => (POS_OTHER, "O"),
            };
            writeln!(out, "{} {pos} {chunk} {label} O", t.surface).unwrap();
        }
        out.push('\n');
    }
    out
}

fn main() {
    std::process::exit(bilstm_crf_ner::cli::run(std::env::args_os()));
}

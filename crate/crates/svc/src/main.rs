fn main() {
    std::process::exit(seurat_svc::cli::run(std::env::args_os()));
}

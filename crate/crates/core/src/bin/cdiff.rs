fn main() {
    std::process::exit(clustered_diffusion::cli::main_with_args(std::env::args_os()));
}

fn main() {
    std::process::exit(asset_forge::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(gfs3d::cli::main());
}

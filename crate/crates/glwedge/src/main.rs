fn main() {
    std::process::exit(glwedge::run(std::env::args_os()));
}

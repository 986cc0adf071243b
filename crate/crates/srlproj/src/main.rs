fn main() {
    std::process::exit(srlproj::run());
}

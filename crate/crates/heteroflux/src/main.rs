fn main() {
    std::process::exit(heteroflux::run());
}

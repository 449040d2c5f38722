fn main() {
    std::process::exit(stpn::cli::main_entry());
}

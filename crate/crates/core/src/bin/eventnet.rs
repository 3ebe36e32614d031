fn main() {
    eventnet::cli::main()
}

fn main() { std::process::exit(event_tensors::cli::run(std::env::args_os())); }

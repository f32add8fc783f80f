fn main() {
    let config = match compare_kit_service::Config::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    if let Err(e) = compare_kit_service::run(config) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

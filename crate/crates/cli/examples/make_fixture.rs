//! Regenerates `fixtures/` from the synthetic generator.

fn main() {
    let dir = depriv_cli::fixture::bundled_dir();
    if let Err(e) = depriv_cli::fixture::write(&dir) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    println!("wrote {}", dir.display());
}

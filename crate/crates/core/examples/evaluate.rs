//! Compares corpus readability before and after simplification for the
//! bundled example pairs, or for a pairs JSON file given as the argument.

use gazeread::eval_readability::{compare_report, PairCorpus};
use gazeread::linguistics::Lexicons;
use gazeread::simplifier::{example_pairs, load_pairs};

fn main() -> gazeread::Result<()> {
    let pairs = match std::env::args().nth(1) {
        Some(path) => load_pairs(path.as_ref())?,
        None => example_pairs(),
    };
    let report = compare_report(&PairCorpus::new(pairs)?, &Lexicons::bundled())?;
    print!("{}", report.to_text());
    Ok(())
}

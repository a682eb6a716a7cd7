//! Per-sentence linguistic measures: syllables, FKGL, ARI, age of
//! acquisition and word frequency.
//!
//! `cargo run --example readability -- "Some sentence." "Another one."`

use gazeread::linguistics::{aoa_stats, ari, count_syllables, fkgl, tokenize_with, zipf_avg, Lexicons};

fn main() -> gazeread::Result<()> {
    let mut sentences: Vec<String> = std::env::args().skip(1).collect();
    if sentences.is_empty() {
        sentences = vec![
            "The cat sat on the mat.".into(),
            "The cause of the fire is unknown; however, authorities suspect that it may have been a deliberate act."
                .into(),
        ];
    }
    let lexicons = Lexicons::bundled();
    for s in &sentences {
        let tokens = tokenize_with(s, Some(&lexicons.frequency));
        let words: Vec<String> = tokens
            .iter()
            .filter(|t| t.is_word)
            .map(|t| Ok(format!("{}/{}", t.surface, count_syllables(&t.surface)?)))
            .collect::<gazeread::Result<_>>()?;
        println!("{s}");
        println!("  syllables  {}", words.join(" "));
        println!("  FKGL {:.2}  ARI {:.2}", fkgl(&tokens)?, ari(&tokens)?);
        match aoa_stats(&tokens, &lexicons.aoa) {
            Some(a) => println!("  AoA avg {:.2} max {:.2} ({} rated words)", a.average, a.maximum, a.covered),
            None => println!("  AoA: no rated words"),
        }
        if let Some(z) = zipf_avg(&tokens, &lexicons.frequency) {
            println!("  Zipf {z:.2}");
        }
    }
    Ok(())
}

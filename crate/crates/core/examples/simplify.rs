//! Builds the two-role prompt, simplifies with the offline mock client and
//! swaps the result into its sentence slot, then undoes the change.

use gazeread::simplifier::{build_prompt_for, simplify, MockClient, SlotDocument};

fn main() -> gazeread::Result<()> {
    let mut doc = SlotDocument::new(vec![
        "Scientists are watching the Pacific.".into(),
        "An El Niño, characterized by warmer-than-normal water temperatures, is forming in its stead.".into(),
        "Fishermen expect a poor season.".into(),
    ]);
    let client = MockClient::with_examples();
    let request = build_prompt_for(1, &doc.slots[1])?;
    println!("system: {}", request.system_instruction);
    println!("user:   {}", request.user_content);

    let result = simplify(&request, &client)?;
    let change = doc.replace_sentence(result.sentence_index, &result.simplified)?;
    println!("\n{}", doc.text());
    doc.undo(&change)?;
    println!("\nundone: {}", doc.text());
    Ok(())
}

//! Joins predicted concepts with a transcript into summarizer prompts.

use semaug::prompt_assembler::{assemble_augmented_input, TimedConcept};

fn main() -> semaug::Result<()> {
    let concepts = [
        TimedConcept {
            start_sec: 40.0,
            text: "add onions".into(),
        },
        TimedConcept {
            start_sec: 12.5,
            text: "melt butter".into(),
        },
    ];
    let transcript = "hello and welcome, today we make onion soup";
    let augmented = assemble_augmented_input("vid", &concepts, transcript, true)?;
    println!("{}\n", augmented.rendered);
    let plain = assemble_augmented_input("vid", &concepts, transcript, false)?;
    println!("{}", plain.rendered);
    assert!(augmented.rendered.ends_with(&plain.rendered));
    Ok(())
}

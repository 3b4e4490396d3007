//! Reading and writing treebanks in the ten-column CoNLL format.
//!
//! Run with `cargo run --example read_write_conll`.

use treelace::conll::{read_treebank_with, ReadOptions};
use treelace::{write_treebank, Result};

const SAMPLE: &str = "\
1\tthe\t_\tDET\tdt\t_\t2\tdet\t_\t_
2\tcat\t_\tNOUN\tnn\t_\t3\tnsubj\t_\t_
3\tsleeps\t_\tVERB\tvb\t_\t0\troot\t_\t_
4\t.\t_\t.\t.\t_\t3\tpunct\t_\t_

1\tdogs\t_\tNOUN\tnn\t_\t2\tnsubj\t_\t_
2\tbark\t_\tVERB\tvb\t_\t0\troot\t_\t_
";

fn main() -> Result<()> {
    // Gold data must be fully annotated and single-rooted.
    let treebank = read_treebank_with(SAMPLE, Some("en"), &ReadOptions::gold())?;
    println!(
        "read {} sentences, {} tokens",
        treebank.sentences.len(),
        treebank.token_count()
    );

    for (i, sentence) in treebank.sentences.iter().enumerate() {
        let forms: Vec<&str> = sentence.tokens.iter().map(|t| t.form.as_str()).collect();
        println!("sentence {}: {}", i + 1, forms.join(" "));
        for token in &sentence.tokens {
            println!(
                "  {} {} -> head {} ({})",
                token.id, token.form, token.head, token.deprel
            );
        }
    }

    // Writing is canonical: empty columns become "_", sentences are
    // separated by blank lines and the file ends with one.
    let rendered = write_treebank(&treebank);
    let reread = read_treebank_with(&rendered, Some("en"), &ReadOptions::gold())?;
    assert_eq!(treebank.sentences, reread.sentences);
    println!("round trip reproduces all {} sentences", reread.sentences.len());

    // Text that is not parsed yet has no heads or labels; the `bare`
    // preset accepts it (the `predictions` preset would accept parser
    // output, which may be multi-rooted but is fully labeled).
    let unparsed = "1\tword\t_\tX\tx\t_\t0\t_\t_\t_\n";
    let skeleton = read_treebank_with(unparsed, None, &ReadOptions::bare())?;
    println!(
        "bare preset accepted an unannotated token: {:?}",
        skeleton.sentences[0].tokens[0].form
    );
    Ok(())
}

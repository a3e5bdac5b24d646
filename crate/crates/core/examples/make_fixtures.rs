//! Regenerates the bundled test fixtures:
//!
//! ```text
//! cargo run -p echosim-core --example make_fixtures -- crates/cli/tests/fixtures
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use echosim::embedding::EmbeddingSource;
use echosim::synthetic::{embedding_blobs, tweet_records};

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;

    let mut out = BufWriter::new(File::create(dir.join("tweets_6000.jsonl"))?);
    for record in tweet_records(6000, 800, 2024) {
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    let real = [
        vec![1.0, 0.2, 0.0, 0.1],
        vec![0.0, 1.0, 0.3, 0.0],
        vec![0.2, 0.0, 1.0, 0.4],
        vec![0.0, 0.3, 0.1, 1.0],
    ];
    let simulated = [vec![1.0, 0.5, 0.1, 0.0], vec![0.1, 0.2, 1.0, 0.6], vec![0.4, 1.0, 0.0, 0.3]];
    let sets = [
        ("embeddings_real.txt", embedding_blobs(&real, 40, 0.35, EmbeddingSource::Real, 7)),
        ("embeddings_simulated.txt", embedding_blobs(&simulated, 50, 0.2, EmbeddingSource::Simulated, 8)),
    ];
    for (name, set) in sets {
        let mut out = BufWriter::new(File::create(dir.join(name))?);
        set.write(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

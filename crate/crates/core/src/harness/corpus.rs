//! Corpus files: a JSON array of instances, or a stream of instance objects
//! (typically one per line).

use std::io::Write;
use std::path::Path;

use crate::error::CorpusError;
use crate::model::{AuctionInstance, RawInstance};

fn syntax(e: serde_json::Error) -> CorpusError {
    CorpusError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    let skip = text[offset..].len() - text[offset..].trim_start().len();
    1 + text.as_bytes()[..offset + skip]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

pub fn parse_corpus(text: &str) -> Result<Vec<AuctionInstance>, CorpusError> {
    if text.trim_start().starts_with('[') {
        let raws: Vec<RawInstance> = serde_json::from_str(text).map_err(syntax)?;
        return raws
            .into_iter()
            .enumerate()
            .map(|(index, raw)| {
                AuctionInstance::try_from(raw).map_err(|source| CorpusError::Invalid {
                    index,
                    line: None,
                    source,
                })
            })
            .collect();
    }

    let mut out = Vec::new();
    let mut stream = serde_json::Deserializer::from_str(text).into_iter::<RawInstance>();
    loop {
        let line = line_of(text, stream.byte_offset());
        let Some(next) = stream.next() else { break };
        let raw = next.map_err(syntax)?;
        let inst = AuctionInstance::try_from(raw).map_err(|source| CorpusError::Invalid {
            index: out.len(),
            line: Some(line),
            source,
        })?;
        out.push(inst);
    }
    Ok(out)
}

/// Parses a single instance object.
pub fn parse_instance(text: &str) -> Result<AuctionInstance, CorpusError> {
    let raw: RawInstance = serde_json::from_str(text).map_err(syntax)?;
    AuctionInstance::try_from(raw).map_err(|source| CorpusError::Invalid {
        index: 0,
        line: None,
        source,
    })
}

pub fn read_corpus(path: &Path) -> Result<Vec<AuctionInstance>, CorpusError> {
    parse_corpus(&std::fs::read_to_string(path)?)
}

/// Newline-delimited JSON, one instance per line.
pub fn write_corpus<W: Write>(mut w: W, corpus: &[AuctionInstance]) -> Result<(), CorpusError> {
    for inst in corpus {
        serde_json::to_writer(&mut w, inst).map_err(syntax)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

//! Table output as CSV with a header row or as JSON lines, and readers for
//! both.

use std::io::{BufRead, Write};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

pub fn write_rows<T: Serialize>(rows: &[T], format: Format, out: impl Write) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = out;
            for row in rows {
                serde_json::to_writer(&mut out, row)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(input: impl BufRead) -> Result<Vec<T>> {
    input
        .lines()
        .enumerate()
        .filter(|(_, line)| line.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line?;
            serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))
        })
        .collect()
}

pub fn read_csv<T: DeserializeOwned>(input: impl std::io::Read) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.with_context(|| format!("record {}", i + 1)))
        .collect()
}

pub fn read_rows<T: DeserializeOwned>(input: impl BufRead, format: Format) -> Result<Vec<T>> {
    match format {
        Format::Csv => read_csv(input),
        Format::Jsonl => read_jsonl(input),
    }
}

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Node indices in activation order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cascade {
    pub nodes: Vec<usize>,
}

impl Cascade {
    pub fn new(nodes: Vec<usize>) -> Self {
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.nodes
    }

    /// Number of next-node prediction points.
    pub fn prediction_points(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }
}

/// Bijection between raw node ids and dense indices `0..N`, assigned in
/// order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Index of `id`, inserting it if unseen.
    pub fn insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Keep only the first activation of a node within a cascade.
    pub dedup: bool,
}

#[derive(Debug, Clone)]
pub struct ParsedCascades {
    pub cascades: Vec<Cascade>,
    pub vocab: Vocabulary,
    /// Lines dropped for having fewer than two nodes.
    pub dropped: usize,
}

/// Reads the line format: one cascade per line, whitespace-separated raw
/// node ids in activation order, `#` lines ignored.
///
/// The vocabulary only covers cascades that survive the length filter.
pub fn parse_cascades<R: BufRead>(reader: R, options: ParseOptions) -> Result<ParsedCascades> {
    let mut vocab = Vocabulary::new();
    let mut cascades = Vec::new();
    let mut dropped = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut tokens: Vec<&str> = Vec::new();
        for token in line.split_whitespace() {
            if let Some(c) = token.chars().find(|c| c.is_control()) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("control character {c:?} in node id {token:?}"),
                });
            }
            if options.dedup && tokens.contains(&token) {
                continue;
            }
            tokens.push(token);
        }
        if tokens.len() < 2 {
            log::warn!("line {lineno}: cascade of length {} dropped", tokens.len());
            dropped += 1;
            continue;
        }
        let nodes = tokens.iter().map(|t| vocab.insert(t)).collect();
        cascades.push(Cascade::new(nodes));
    }
    if dropped > 0 {
        log::warn!("{dropped} cascades shorter than 2 nodes were dropped");
    }
    Ok(ParsedCascades {
        cascades,
        vocab,
        dropped,
    })
}

pub fn write_cascades<W: Write>(cascades: &[Cascade], vocab: &Vocabulary, mut w: W) -> Result<()> {
    for c in cascades {
        let ids: Vec<&str> = c
            .nodes
            .iter()
            .map(|&i| {
                vocab.id_of(i).ok_or_else(|| {
                    Error::InvalidArgument(format!("node index {i} not in vocabulary"))
                })
            })
            .collect::<Result<_>>()?;
        writeln!(w, "{}", ids.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ParsedCascades> {
        parse_cascades(text.as_bytes(), ParseOptions::default())
    }

    #[test]
    fn single_line() {
        let p = parse("a b c\n").unwrap();
        assert_eq!(p.cascades, vec![Cascade::new(vec![0, 1, 2])]);
        assert_eq!(p.vocab.len(), 3);
    }

    #[test]
    fn short_lines_are_dropped_before_vocabulary() {
        let p = parse("a\n b c\n").unwrap();
        assert_eq!(p.cascades.len(), 1);
        assert_eq!(p.dropped, 1);
        assert_eq!(p.vocab.len(), 2);
        assert_eq!(p.vocab.index_of("a"), None);
    }

    #[test]
    fn comments_and_blank_lines() {
        let p = parse("# header\n\n  \nx y\n#z w\n").unwrap();
        assert_eq!(p.cascades.len(), 1);
        assert_eq!(p.dropped, 0);
    }

    #[test]
    fn garbage_names_line() {
        let err = parse("a b\nc \u{1}d e\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_cascades(&b"a b\n\xff\xfe c\n"[..], ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn repeats_kept_unless_dedup() {
        let text = "a b a c\n";
        assert_eq!(parse(text).unwrap().cascades[0].nodes, vec![0, 1, 0, 2]);
        let p = parse_cascades(text.as_bytes(), ParseOptions { dedup: true }).unwrap();
        assert_eq!(p.cascades[0].nodes, vec![0, 1, 2]);
        let p = parse_cascades("a a\n".as_bytes(), ParseOptions { dedup: true }).unwrap();
        assert_eq!((p.cascades.len(), p.dropped), (0, 1));
    }

    #[test]
    fn write_then_parse() {
        let p = parse("u1 u2 u3\nu3 u9\n").unwrap();
        let mut out = Vec::new();
        write_cascades(&p.cascades, &p.vocab, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "u1 u2 u3\nu3 u9\n");
        assert_eq!(parse(std::str::from_utf8(&out).unwrap()).unwrap().cascades, p.cascades);
    }
}

use super::cascade::Cascade;
use crate::error::{invalid, Result};

/// Default truncation length for long cascades.
pub const DEFAULT_MAX_LEN: usize = 200;

/// A padded `B x L` block of cascades.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Row-major `B x L` node indices; padded slots hold `pad_index`.
    pub indices: Vec<usize>,
    pub lengths: Vec<usize>,
    /// `true` marks a padded slot.
    pub pad_mask: Vec<bool>,
    pub width: usize,
    pub pad_index: usize,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    /// Unpadded node sequence of row `b`.
    pub fn row(&self, b: usize) -> &[usize] {
        let start = b * self.width;
        &self.indices[start..start + self.lengths[b]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.size()).map(move |b| self.row(b))
    }

    pub fn prediction_points(&self) -> usize {
        self.lengths.iter().map(|l| l.saturating_sub(1)).sum()
    }
}

/// Groups consecutive cascades into batches of `batch_size` (the last may be
/// smaller), truncating each cascade to its first `max_len` nodes.
pub fn make_batches(
    cascades: &[Cascade],
    batch_size: usize,
    max_len: usize,
    pad_index: usize,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(invalid("batch size must be >= 1"));
    }
    if max_len == 0 {
        return Err(invalid("max_len must be >= 1"));
    }
    Ok(cascades
        .chunks(batch_size)
        .map(|chunk| {
            let lengths: Vec<usize> = chunk.iter().map(|c| c.len().min(max_len)).collect();
            let width = lengths.iter().copied().max().unwrap_or(0);
            let mut indices = vec![pad_index; chunk.len() * width];
            let mut pad_mask = vec![true; chunk.len() * width];
            for (b, (c, &len)) in chunk.iter().zip(&lengths).enumerate() {
                indices[b * width..b * width + len].copy_from_slice(&c.nodes[..len]);
                pad_mask[b * width..b * width + len].fill(false);
            }
            Batch {
                indices,
                lengths,
                pad_mask,
                width,
                pad_index,
            }
        })
        .collect())
}

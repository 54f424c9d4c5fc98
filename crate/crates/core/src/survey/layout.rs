use std::ops::Range;

use super::SurveySchema;

/// Position of each item's latent block inside the D-vector (0-based,
/// half-open ranges).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentLayout {
    ranges: Vec<Range<usize>>,
    item_of_dim: Vec<usize>,
}

impl LatentLayout {
    pub fn new(schema: &SurveySchema) -> Self {
        let mut ranges = Vec::with_capacity(schema.n_items());
        let mut item_of_dim = Vec::with_capacity(schema.latent_dim());
        let mut start = 0;
        for (j, item) in schema.items().iter().enumerate() {
            let end = start + item.latent_width();
            ranges.push(start..end);
            item_of_dim.extend(std::iter::repeat_n(j, end - start));
            start = end;
        }
        LatentLayout { ranges, item_of_dim }
    }

    pub fn range(&self, item: usize) -> Range<usize> {
        self.ranges[item].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn item_of_dim(&self, d: usize) -> usize {
        self.item_of_dim[d]
    }

    pub fn dim(&self) -> usize {
        self.item_of_dim.len()
    }
}

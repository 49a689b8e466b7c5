//! Set partitions of the coordinate set `{0, …, k-1}` of a k-tuple.
//!
//! A tuple `x ∈ [n]^k` induces the partition "coordinates `j`, `l` share a block
//! iff `x_j = x_l`". Partitions are stored as restricted growth strings: block
//! labels in order of first appearance.

use std::collections::HashMap;

pub(crate) type Rgs = Vec<u8>;

/// All set partitions of `{0..k}` as restricted growth strings.
pub(crate) fn set_partitions(k: usize) -> Vec<Rgs> {
    fn extend(prefix: &mut Rgs, max_label: u8, k: usize, out: &mut Vec<Rgs>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for label in 0..=max_label + 1 {
            prefix.push(label);
            extend(prefix, max_label.max(label), k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut prefix = vec![0u8];
    extend(&mut prefix, 0, k, &mut out);
    out
}

/// The partition induced by equal entries of `tuple`.
pub(crate) fn rgs_of<T: PartialEq>(tuple: &[T]) -> Rgs {
    let mut seen: Vec<&T> = Vec::new();
    tuple
        .iter()
        .map(|x| match seen.iter().position(|s| *s == x) {
            Some(pos) => pos as u8,
            None => {
                seen.push(x);
                (seen.len() - 1) as u8
            }
        })
        .collect()
}

pub(crate) fn block_count(rgs: &[u8]) -> usize {
    rgs.iter().map(|&b| b as usize + 1).max().unwrap_or(0)
}

/// Block sizes in decreasing order: the orbit of the partition under
/// permutations of coordinates.
pub(crate) fn shape(rgs: &[u8]) -> Vec<usize> {
    let mut sizes = vec![0usize; block_count(rgs)];
    for &b in rgs {
        sizes[b as usize] += 1;
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Partitions of `{0..k}` grouped by shape.
pub(crate) struct ShapeClasses {
    pub partitions: Vec<Rgs>,
    /// Shape index of every partition.
    pub shape_of: Vec<usize>,
    pub shapes: Vec<Vec<usize>>,
    /// Index into `partitions` of one representative per shape.
    pub representative: Vec<usize>,
    /// Number of set partitions of each shape.
    pub multiplicity: Vec<u128>,
}

impl ShapeClasses {
    pub fn new(k: usize) -> Self {
        let partitions = set_partitions(k);
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut shapes = Vec::new();
        let mut representative = Vec::new();
        let mut multiplicity = Vec::new();
        let mut shape_of = Vec::with_capacity(partitions.len());
        for (i, rgs) in partitions.iter().enumerate() {
            let s = shape(rgs);
            let id = *index.entry(s.clone()).or_insert_with(|| {
                shapes.push(s);
                representative.push(i);
                multiplicity.push(0);
                shapes.len() - 1
            });
            multiplicity[id] += 1;
            shape_of.push(id);
        }
        Self {
            partitions,
            shape_of,
            shapes,
            representative,
            multiplicity,
        }
    }
}

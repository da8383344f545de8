//! Longest-common-subsequence line diff.
//!
//! Exact-match equality, no move detection. Ties between equally long
//! alignments are broken by matching as early as possible and, among
//! non-matches, emitting deletions before insertions.

/// One step of an edit script; indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Equal { old: usize, new: usize },
    Delete { old: usize },
    Insert { new: usize },
}

pub fn diff<T: PartialEq>(old: &[T], new: &[T]) -> Vec<Op> {
    let prefix = old.iter().zip(new).take_while(|(a, b)| a == b).count();
    let suffix = old[prefix..]
        .iter()
        .rev()
        .zip(new[prefix..].iter().rev())
        .take_while(|(a, b)| a == b)
        .count();
    let a = &old[prefix..old.len() - suffix];
    let b = &new[prefix..new.len() - suffix];

    let mut ops: Vec<Op> = (0..prefix).map(|i| Op::Equal { old: i, new: i }).collect();

    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let mut table = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i * width + j] = if a[i] == b[j] {
                table[(i + 1) * width + j + 1] + 1
            } else {
                table[(i + 1) * width + j].max(table[i * width + j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && a[i] == b[j] {
            ops.push(Op::Equal { old: prefix + i, new: prefix + j });
            i += 1;
            j += 1;
        } else if j == m || (i < n && table[(i + 1) * width + j] >= table[i * width + j + 1]) {
            ops.push(Op::Delete { old: prefix + i });
            i += 1;
        } else {
            ops.push(Op::Insert { new: prefix + j });
            j += 1;
        }
    }
    let tail_old = old.len() - suffix;
    let tail_new = new.len() - suffix;
    ops.extend((0..suffix).map(|k| Op::Equal { old: tail_old + k, new: tail_new + k }));
    ops
}

/// Line correspondence in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub old_to_new: Vec<Option<usize>>,
    pub new_to_old: Vec<Option<usize>>,
}

pub fn align<T: PartialEq>(old: &[T], new: &[T]) -> Alignment {
    let mut al = Alignment { old_to_new: vec![None; old.len()], new_to_old: vec![None; new.len()] };
    for op in diff(old, new) {
        if let Op::Equal { old, new } = op {
            al.old_to_new[old] = Some(new);
            al.new_to_old[new] = Some(old);
        }
    }
    al
}

/// A maximal run of non-matching lines, as half-open 0-based ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: usize,
    pub old_end: usize,
    pub new_start: usize,
    pub new_end: usize,
}

impl Hunk {
    pub fn is_pure_deletion(&self) -> bool {
        self.new_start == self.new_end && self.old_start < self.old_end
    }
}

pub fn hunks(ops: &[Op]) -> Vec<Hunk> {
    let mut out = Vec::new();
    let (mut old_pos, mut new_pos) = (0, 0);
    let mut current: Option<Hunk> = None;
    for op in ops {
        match *op {
            Op::Equal { old, new } => {
                if let Some(h) = current.take() {
                    out.push(h);
                }
                old_pos = old + 1;
                new_pos = new + 1;
            }
            Op::Delete { old } => {
                let h = current.get_or_insert(Hunk { old_start: old, old_end: old, new_start: new_pos, new_end: new_pos });
                h.old_end = old + 1;
                old_pos = old + 1;
            }
            Op::Insert { new } => {
                let h = current.get_or_insert(Hunk { old_start: old_pos, old_end: old_pos, new_start: new, new_end: new });
                h.new_end = new + 1;
                new_pos = new + 1;
            }
        }
    }
    if let Some(h) = current {
        out.push(h);
    }
    out
}

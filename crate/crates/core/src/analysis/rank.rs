use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Smallest value gets rank 1.
    Ascending,
    /// Largest value gets rank 1.
    Descending,
}

/// Fractional ("1.5 1.5 3") ranking: tied values share the mean of the
/// positions they span. Values must be comparable (no NaN).
pub fn fractional_rank(values: &[f64], direction: Direction) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    match direction {
        Direction::Ascending => order.sort_by(|&i, &j| values[i].total_cmp(&values[j])),
        Direction::Descending => order.sort_by(|&i, &j| values[j].total_cmp(&values[i])),
    }

    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let shared = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = shared;
        }
        start = end;
    }
    ranks
}

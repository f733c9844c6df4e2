//! Character-level Levenshtein distance and closest-suffix selection.

/// Above this many characters, candidates are pre-ranked by line distance so
/// that a tight bound is found early.
pub const LONG_SUFFIX_CHARS: usize = 4096;

/// Unit-cost insert/delete/substitute distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

fn trim_common<'x, T: PartialEq>(mut a: &'x [T], mut b: &'x [T]) -> (&'x [T], &'x [T]) {
    let pre = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    a = &a[pre..];
    b = &b[pre..];
    let suf = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    (&a[..a.len() - suf], &b[..b.len() - suf])
}

fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = trim_common(a, b);
    let (a, b) = if a.len() < b.len() { (a, b) } else { (b, a) };
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=a.len()).collect();
    let mut cur = vec![0; a.len() + 1];
    for (j, y) in b.iter().enumerate() {
        cur[0] = j + 1;
        for (i, x) in a.iter().enumerate() {
            let sub = prev[i] + usize::from(x != y);
            cur[i + 1] = sub.min(prev[i + 1] + 1).min(cur[i] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[a.len()]
}

/// Distance if it is at most `max`, computed inside a diagonal band of
/// width `2 * max + 1` with early exit.
pub fn edit_distance_within(a: &str, b: &str, max: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    bounded(&a, &b, max)
}

fn bounded(a: &[char], b: &[char], max: usize) -> Option<usize> {
    let (a, b) = trim_common(a, b);
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > max {
        return None;
    }
    if n == 0 || m == 0 {
        return Some(n.max(m));
    }
    let inf = max + 1;
    let mut prev = vec![inf; m + 1];
    let mut cur = vec![inf; m + 1];
    for (j, slot) in prev.iter_mut().enumerate().take(max.min(m) + 1) {
        *slot = j;
    }
    for i in 1..=n {
        let lo = i.saturating_sub(max).max(1);
        let hi = (i + max).min(m);
        cur.fill(inf);
        if i <= max {
            cur[0] = i;
        }
        let mut row_min = cur[0];
        for j in lo..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let v = sub.min(prev[j] + 1).min(cur[j - 1] + 1).min(inf);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (prev[m] <= max).then_some(prev[m])
}

/// Levenshtein distance with whole lines as symbols.
pub fn line_distance(a: &str, b: &str) -> usize {
    let a: Vec<&str> = a.lines().collect();
    let b: Vec<&str> = b.lines().collect();
    levenshtein(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Closest {
    pub index: usize,
    pub distance: usize,
}

/// The sample nearest to `base` by edit distance; ties go to the lowest
/// index. `None` only for an empty sample list.
pub fn select_closest_suffix<S: AsRef<str>>(samples: &[S], base: &str) -> Option<Closest> {
    if samples.is_empty() {
        return None;
    }
    let base_chars: Vec<char> = base.chars().collect();
    let long = base_chars.len() > LONG_SUFFIX_CHARS
        || samples
            .iter()
            .any(|s| s.as_ref().len() > LONG_SUFFIX_CHARS);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    if long {
        order.sort_by_key(|&i| (line_distance(samples[i].as_ref(), base), i));
    }
    let mut best: Option<Closest> = None;
    for i in order {
        let chars: Vec<char> = samples[i].as_ref().chars().collect();
        let d = match best {
            None => Some(levenshtein(&chars, &base_chars)),
            // A later index must beat the best strictly; an earlier one may tie.
            Some(b) if i < b.index => bounded(&chars, &base_chars, b.distance),
            Some(b) if b.distance == 0 => None,
            Some(b) => bounded(&chars, &base_chars, b.distance - 1),
        };
        if let Some(d) = d {
            let better = match best {
                None => true,
                Some(b) => d < b.distance || (d == b.distance && i < b.index),
            };
            if better {
                best = Some(Closest { index: i, distance: d });
            }
        }
    }
    best
}

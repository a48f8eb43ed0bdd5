//! Stream-level symbol error counting.

/// Edit distance between `sent` and `received` restricted to alignments
/// whose index offset stays within `band` of the straight diagonal line
/// between the two ends. Insertions, deletions and substitutions each cost
/// one. Equals the unrestricted distance whenever the optimal alignment
/// stays inside the band, and is an upper bound otherwise.
pub fn banded_levenshtein(sent: &[u8], received: &[u8], band: usize) -> usize {
    let n = sent.len();
    let m = received.len();
    if n == 0 || m == 0 {
        return n.max(m);
    }
    let band = band.max(n.abs_diff(m)) + 1;
    let slope = m as f64 / n as f64;
    let lo_of = |i: usize| ((i as f64 * slope) as usize).saturating_sub(band);
    let hi_of = |i: usize| (((i as f64 * slope).ceil() as usize) + band).min(m);
    const INF: usize = usize::MAX / 2;

    // Row i covers columns lo_of(i)..=hi_of(i).
    let mut prev_lo = 0usize;
    let mut prev: Vec<usize> = (0..=hi_of(0)).collect();
    let mut cur = Vec::with_capacity(2 * band + 4);
    for i in 1..=n {
        let lo = lo_of(i);
        let hi = hi_of(i);
        cur.clear();
        let get_prev = |j: usize| -> usize {
            if j >= prev_lo && j - prev_lo < prev.len() {
                prev[j - prev_lo]
            } else {
                INF
            }
        };
        for j in lo..=hi {
            let mut best = get_prev(j) + 1;
            if j == 0 {
                best = best.min(i);
            } else {
                let diag = get_prev(j - 1) + usize::from(sent[i - 1] != received[j - 1]);
                let left = if j > lo { cur[j - 1 - lo] + 1 } else { INF };
                best = best.min(diag).min(left);
            }
            cur.push(best);
        }
        prev_lo = lo;
        std::mem::swap(&mut prev, &mut cur);
    }
    let hi = hi_of(n);
    if hi == m {
        prev[m - prev_lo]
    } else {
        INF
    }
}

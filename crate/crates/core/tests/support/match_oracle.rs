//! Brute-force reference for greedy one-to-one matching.

use uavfusion_core::{Label, Rng};

/// Repeatedly takes the best remaining eligible pair: smallest `|dt|`, then
/// earlier `a` timestamp, then smaller `b` index, then smaller `a` index.
pub fn brute_force(
    a: &[(f64, Label)],
    b: &[(f64, Label)],
    tolerance: f64,
    label_constrained: bool,
) -> Vec<(usize, usize)> {
    let mut free_a = vec![true; a.len()];
    let mut free_b = vec![true; b.len()];
    let mut pairs = Vec::new();
    loop {
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for (i, &(ta, la)) in a.iter().enumerate() {
            for (j, &(tb, lb)) in b.iter().enumerate() {
                let dt = (ta - tb).abs();
                if !free_a[i] || !free_b[j] || dt > tolerance || (label_constrained && la != lb) {
                    continue;
                }
                let key = (dt, ta, j, i);
                let better = match best {
                    None => true,
                    Some(k) => key.partial_cmp(&k) == Some(std::cmp::Ordering::Less),
                };
                if better {
                    best = Some(key);
                }
            }
        }
        match best {
            Some((_, _, j, i)) => {
                free_a[i] = false;
                free_b[j] = false;
                pairs.push((i, j));
            }
            None => break,
        }
    }
    pairs.sort_unstable();
    pairs
}

/// A sorted stream of up to `max_len` samples on a coarse time grid, so that
/// equal distances and equal timestamps occur often.
pub fn random_stream(rng: &mut Rng, max_len: usize) -> Vec<(f64, Label)> {
    let n = rng.index(max_len + 1);
    let mut s: Vec<(f64, Label)> = (0..n)
        .map(|_| {
            let t = rng.index(21) as f64 * 0.1;
            let l = if rng.bernoulli(0.5) {
                Label::Uav
            } else {
                Label::FalseAlarm
            };
            (t, l)
        })
        .collect();
    s.sort_by(|x, y| x.0.total_cmp(&y.0));
    s
}

pub const TOLERANCES: [f64; 5] = [0.0, 0.1, 0.25, 0.5, 1.0];

/// Runs `count` random instances and returns the first disagreement.
pub fn compare_with_oracle(seed: u64, count: usize) -> Result<(), String> {
    let mut rng = Rng::seed_from(seed);
    for k in 0..count {
        let a = random_stream(&mut rng, 8);
        let b = random_stream(&mut rng, 8);
        let tol = TOLERANCES[rng.index(TOLERANCES.len())];
        let constrained = rng.bernoulli(0.5);
        let got = uavfusion_core::registration::match_streams(&a, &b, tol, constrained)
            .map_err(|e| e.to_string())?;
        let want = brute_force(&a, &b, tol, constrained);
        if got != want {
            return Err(format!("instance {k}: a {a:?} b {b:?} tol {tol} constrained {constrained}: got {got:?}, oracle {want:?}"));
        }
    }
    Ok(())
}

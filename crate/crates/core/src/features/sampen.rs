use crate::signal::PpgWindow;
use crate::util::std_dev;

/// Template-match counts behind a sample entropy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampEnCounts {
    /// Pairs matching at length m + 1.
    pub a: u64,
    /// Pairs matching at length m.
    pub b: u64,
    /// Number of templates compared (`N - m * tau`).
    pub templates: usize,
}

impl SampEnCounts {
    /// `-ln(A / B)`. `None` when B = 0. When A = 0 the value is capped at
    /// `-ln(2 / (N_t (N_t - 1)))`, the largest value resolvable with N_t
    /// templates.
    pub fn entropy(&self) -> Option<f64> {
        if self.b == 0 {
            return None;
        }
        if self.a == 0 {
            let nt = self.templates as f64;
            return Some(-(2.0 / (nt * (nt - 1.0))).ln());
        }
        Some(-(self.a as f64 / self.b as f64).ln())
    }
}

/// Counts Chebyshev template matches within `tolerance` for delay-embedded
/// templates of length `m` and `m + 1`, self-matches excluded. Both lengths
/// use the same `N - m * tau` template starts. `None` if fewer than two
/// templates fit.
pub fn sampen_counts(x: &[f64], m: usize, tolerance: f64, tau: usize) -> Option<SampEnCounts> {
    if m == 0 || tau == 0 {
        return None;
    }
    let span = m * tau;
    if x.len() <= span + 1 {
        return None;
    }
    let nt = x.len() - span;
    let (mut a, mut b) = (0u64, 0u64);
    for i in 0..nt - 1 {
        for j in i + 1..nt {
            let matched = (0..m).all(|k| (x[i + k * tau] - x[j + k * tau]).abs() <= tolerance);
            if matched {
                b += 1;
                if (x[i + span] - x[j + span]).abs() <= tolerance {
                    a += 1;
                }
            }
        }
    }
    Some(SampEnCounts { a, b, templates: nt })
}

/// Sample entropy with tolerance `r_frac * SD(window)`. Invalid (`None`)
/// for a flat window, too few samples, or no length-m matches.
pub fn sampen(w: &PpgWindow<'_>, m: usize, r_frac: f64, tau: usize) -> Option<f64> {
    let sd = std_dev(w.data);
    if !(sd > 0.0) {
        return None;
    }
    sampen_counts(w.data, m, r_frac * sd, tau)?.entropy()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::util::derive_rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    /// Brute-force reference: materialise every template of both lengths and
    /// compare all pairs.
    pub(crate) fn oracle_counts(x: &[f64], m: usize, r: f64, tau: usize) -> (u64, u64) {
        let nt = x.len() - m * tau;
        let template = |i: usize, len: usize| -> Vec<f64> { (0..len).map(|k| x[i + k * tau]).collect() };
        let cheb = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let short: Vec<Vec<f64>> = (0..nt).map(|i| template(i, m)).collect();
        let long: Vec<Vec<f64>> = (0..nt).map(|i| template(i, m + 1)).collect();
        let (mut a, mut b) = (0, 0);
        for i in 0..nt {
            for j in 0..nt {
                if i == j {
                    continue;
                }
                if cheb(&short[i], &short[j]) <= r {
                    b += 1;
                }
                if cheb(&long[i], &long[j]) <= r {
                    a += 1;
                }
            }
        }
        (a / 2, b / 2)
    }

    #[test]
    fn flat_window_is_invalid() {
        let x = vec![1.0; 100];
        assert_eq!(sampen(&PpgWindow::new("c", 0, &x, 30.0), 2, 0.2, 1), None);
    }

    #[test]
    fn sawtooth_is_regular() {
        let x: Vec<f64> = (0..200).map(|i| (i % 10) as f64 / 10.0).collect();
        let sd = std_dev(&x);
        let c = sampen_counts(&x, 2, 0.2 * sd, 1).unwrap();
        assert_eq!((c.a, c.b), oracle_counts(&x, 2, 0.2 * sd, 1));
        let h = c.entropy().unwrap();
        assert!(h.abs() < 0.02, "sampen of sawtooth {h}");
    }

    #[test]
    fn gaussian_noise_band() {
        let mut values = Vec::new();
        for seed in 0..20 {
            let mut rng = derive_rng(seed, 0);
            let x: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
            let sd = std_dev(&x);
            let (a, b) = oracle_counts(&x, 2, 0.2 * sd, 1);
            let oracle_h = -(a as f64 / b as f64).ln();
            let h = sampen(&PpgWindow::new("n", 0, &x, 30.0), 2, 0.2, 1).unwrap();
            assert_eq!(h, oracle_h);
            values.push(h);
        }
        // N = 300 leaves a seed-to-seed spread of about 0.15, so the band is
        // checked on the mean and on most seeds individually.
        let mean = values.iter().sum::<f64>() / 20.0;
        assert!((2.1..=2.6).contains(&mean), "mean {mean}");
        let inside = values.iter().filter(|h| (2.1..=2.6).contains(*h)).count();
        assert!(inside >= 17, "{values:?}");
        assert!(values.iter().all(|h| (1.9..=2.8).contains(h)), "{values:?}");
    }

    #[test]
    fn zero_a_is_capped() {
        let c = SampEnCounts { a: 0, b: 3, templates: 72 };
        assert!((c.entropy().unwrap() - (72.0f64 * 71.0 / 2.0).ln()).abs() < 1e-12);
        assert_eq!(SampEnCounts { a: 0, b: 0, templates: 72 }.entropy(), None);
    }

    proptest! {
        #[test]
        fn counts_match_oracle(
            x in prop::collection::vec(-1.0f64..1.0, 20..120),
            m in 1usize..4,
            tau in 1usize..4,
            r in 0.05f64..0.6,
        ) {
            prop_assume!(x.len() > m * tau + 1);
            let c = sampen_counts(&x, m, r, tau).unwrap();
            prop_assert_eq!((c.a, c.b), oracle_counts(&x, m, r, tau));
        }
    }
}

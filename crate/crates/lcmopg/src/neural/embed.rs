//! Cosine feature embedding for inputs in the unit interval.

/// Total output width for per-coordinate widths `widths`.
pub fn embedded_dim(widths: &[usize]) -> usize {
    widths.iter().sum()
}

/// Embed each coordinate `x_j` (expected in `[0, 1]`) as
/// `(cos(pi x_j), cos(2 pi x_j), ..., cos(k_j pi x_j))` and concatenate.
///
/// The embedding has no parameters; every output lies in `[-1, 1]`.
pub fn cosine_embed(x: &[f64], widths: &[usize]) -> Vec<f64> {
    assert_eq!(x.len(), widths.len(), "one width per coordinate");
    let mut out = Vec::with_capacity(embedded_dim(widths));
    for (&xj, &k) in x.iter().zip(widths) {
        for n in 1..=k {
            out.push((n as f64 * std::f64::consts::PI * xj).cos());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_gives_all_ones() {
        assert_eq!(cosine_embed(&[0.0], &[3]), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn half_input_alternates() {
        let e = cosine_embed(&[0.5], &[4]);
        let expect = [0.0, -1.0, 0.0, 1.0];
        for (a, b) in e.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn unit_input_alternates_signs() {
        let e = cosine_embed(&[1.0], &[2]);
        assert!((e[0] + 1.0).abs() < 1e-15);
        assert!((e[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concatenates_per_coordinate_blocks() {
        let e = cosine_embed(&[0.0, 0.5], &[2, 3]);
        assert_eq!(e.len(), 5);
        assert_eq!(&e[0..2], &[1.0, 1.0]);
        assert!((e[2] - 0.0).abs() < 1e-15);
        assert!((e[3] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn outputs_bounded_by_one() {
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            for v in cosine_embed(&[x], &[8]) {
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn dim_helper_matches_output_length() {
        let widths = [3usize, 1, 5];
        assert_eq!(
            embedded_dim(&widths),
            cosine_embed(&[0.1, 0.2, 0.3], &widths).len()
        );
    }

    #[test]
    fn embedding_separates_distinct_unit_interval_inputs() {
        // cos(pi x) is strictly decreasing on [0, 1], so even the first
        // harmonic distinguishes any two latent coordinates: a dense probe
        // confirms the map never collapses two grid points.
        let n = 500;
        let embeds: Vec<Vec<f64>> = (0..=n)
            .map(|i| cosine_embed(&[i as f64 / n as f64], &[8]))
            .collect();
        for i in 0..embeds.len() {
            for j in (i + 1)..embeds.len() {
                let gap: f64 = embeds[i]
                    .iter()
                    .zip(&embeds[j])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(gap > 1e-6, "inputs {i}/{n} and {j}/{n} collide");
            }
        }
    }
}

//! Initial design generators.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{ParamKind, ParamSpace, Point, SobolSequence, SpaceError, Value};

/// `n` i.i.d. uniform points; children are drawn only when active.
pub fn sample_random<R: Rng + ?Sized>(space: &ParamSpace, n: usize, rng: &mut R) -> Vec<Point> {
    (0..n)
        .map(|_| {
            let mut values = vec![None; space.dim()];
            space.repair(&mut values, rng);
            Point::new(values)
        })
        .collect()
}

/// Latin hypercube sample. Numeric dimensions get one point per equal-width
/// bin; factors and logicals cycle through their levels before shuffling.
/// Hierarchical spaces fall back to [`sample_random`].
pub fn sample_lhs<R: Rng + ?Sized>(
    space: &ParamSpace,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Point>, SpaceError> {
    if n < 1 {
        return Err(SpaceError::EmptyDesign);
    }
    if space.is_hierarchical() {
        log::warn!("latin hypercube sampling is undefined on hierarchical spaces; using random design");
        return Ok(sample_random(space, n, rng));
    }
    let mut columns: Vec<Vec<Value>> = Vec::with_capacity(space.dim());
    for def in space.params() {
        let mut col: Vec<Value> = match def.kind {
            ParamKind::Double | ParamKind::Integer => {
                let mut bins: Vec<usize> = (0..n).collect();
                bins.shuffle(rng);
                bins.into_iter()
                    .map(|b| def.from_unit((b as f64 + rng.random::<f64>()) / n as f64))
                    .collect()
            }
            ParamKind::Factor => (0..n).map(|i| Value::Level(i % def.levels.len())).collect(),
            ParamKind::Logical => (0..n).map(|i| Value::Bool(i % 2 == 1)).collect(),
        };
        if !def.kind.is_numeric() {
            col.shuffle(rng);
        }
        columns.push(col);
    }
    Ok((0..n)
        .map(|i| Point::new(columns.iter().map(|c| Some(c[i])).collect()))
        .collect())
}

/// First `n` points of a (optionally scrambled) Sobol sequence mapped through
/// the parameter bounds. Hierarchical spaces fall back to a random design
/// drawn from a generator seeded with `scramble_seed`.
pub fn sample_sobol(
    space: &ParamSpace,
    n: usize,
    scramble_seed: Option<u64>,
) -> Result<Vec<Point>, SpaceError> {
    if n < 1 {
        return Err(SpaceError::EmptyDesign);
    }
    if space.dim() > super::SOBOL_MAX_DIM {
        return Err(SpaceError::SobolDim(space.dim()));
    }
    if space.is_hierarchical() {
        use rand::SeedableRng;
        log::warn!("sobol sampling is undefined on hierarchical spaces; using random design");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(scramble_seed.unwrap_or(0));
        return Ok(sample_random(space, n, &mut rng));
    }
    let mut seq = SobolSequence::new(space.dim(), scramble_seed)?;
    (0..n).map(|_| space.from_unit(&seq.next_point())).collect()
}

/// Full factorial grid. Numerics use `resolution` equally spaced unit-scale
/// values including both endpoints (unique after rounding for integers);
/// factors and logicals use all levels. The first parameter varies slowest.
pub fn sample_grid(space: &ParamSpace, resolution: usize) -> Result<Vec<Point>, SpaceError> {
    if space.is_hierarchical() {
        return Err(SpaceError::Hierarchical("grid design"));
    }
    if resolution < 2 && space.params().iter().any(|p| p.kind.is_numeric()) {
        return Err(SpaceError::Resolution(resolution));
    }
    let axes: Vec<Vec<Value>> = space
        .params()
        .iter()
        .map(|def| match def.kind {
            ParamKind::Double | ParamKind::Integer => {
                let mut axis: Vec<Value> = Vec::with_capacity(resolution);
                for k in 0..resolution {
                    let v = def.from_unit(k as f64 / (resolution - 1) as f64);
                    if !axis.contains(&v) {
                        axis.push(v);
                    }
                }
                axis
            }
            ParamKind::Factor => (0..def.levels.len()).map(Value::Level).collect(),
            ParamKind::Logical => vec![Value::Bool(false), Value::Bool(true)],
        })
        .collect();
    let mut out = vec![Vec::<Option<Value>>::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(Some(*v));
                    p
                })
            })
            .collect();
    }
    Ok(out.into_iter().map(Point::new).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamDef;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_1d() -> ParamSpace {
        ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap()
    }

    #[test]
    fn random_points_lie_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts = sample_random(&unit_1d(), 4, &mut rng);
        assert_eq!(pts.len(), 4);
        for p in pts {
            let x = p.num(0).unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn log_scaled_median_is_geometric_center() {
        let s = ParamSpace::new(vec![ParamDef::double("x", 1e-5, 1e5).log()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut xs: Vec<f64> = sample_random(&s, 100_000, &mut rng)
            .iter()
            .map(|p| p.num(0).unwrap())
            .collect();
        xs.sort_by(f64::total_cmp);
        let median = xs[xs.len() / 2];
        assert!((0.5..=2.0).contains(&median), "median {median}");
    }

    #[test]
    fn lhs_hits_every_bin_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = sample_lhs(&unit_1d(), 10, &mut rng).unwrap();
        let mut bins = [0; 10];
        for p in &pts {
            bins[((p.num(0).unwrap() * 10.0) as usize).min(9)] += 1;
        }
        assert_eq!(bins, [1; 10]);

        let s2 = ParamSpace::new(vec![
            ParamDef::double("a", -1.0, 1.0),
            ParamDef::double("b", 10.0, 20.0),
        ])
        .unwrap();
        let pts = sample_lhs(&s2, 5, &mut rng).unwrap();
        for d in 0..2 {
            let mut bins = [0; 5];
            for p in &pts {
                let u = s2.param(d).to_unit(p.values[d].as_ref().unwrap());
                bins[((u * 5.0) as usize).min(4)] += 1;
            }
            assert_eq!(bins, [1; 5]);
        }
        assert!(sample_lhs(&s2, 0, &mut rng).is_err());
    }

    #[test]
    fn lhs_factor_levels_are_balanced() {
        let s = ParamSpace::new(vec![ParamDef::factor("f", &["a", "b", "c"])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = sample_lhs(&s, 9, &mut rng).unwrap();
        let mut counts = [0; 3];
        for p in pts {
            if let Some(Value::Level(k)) = p.values[0] {
                counts[k] += 1;
            }
        }
        assert_eq!(counts, [3, 3, 3]);
    }

    #[test]
    fn grid_examples() {
        let g = sample_grid(&unit_1d(), 3).unwrap();
        let xs: Vec<f64> = g.iter().map(|p| p.num(0).unwrap()).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);

        let s = ParamSpace::new(vec![
            ParamDef::double("x", 0.0, 1.0),
            ParamDef::factor("f", &["a", "b"]),
        ])
        .unwrap();
        assert_eq!(sample_grid(&s, 2).unwrap().len(), 4);
        assert!(matches!(sample_grid(&s, 1), Err(SpaceError::Resolution(1))));

        let ints = ParamSpace::new(vec![ParamDef::integer("k", 0, 2)]).unwrap();
        assert_eq!(sample_grid(&ints, 10).unwrap().len(), 3);
    }

    #[test]
    fn grid_rejects_hierarchical_space() {
        let s = ParamSpace::new(vec![
            ParamDef::factor("branch", &["a", "b"]),
            ParamDef::double("c", 0.0, 1.0).depends_on("branch", "a"),
        ])
        .unwrap();
        assert!(sample_grid(&s, 3).is_err());
    }

    #[test]
    fn sobol_single_point_and_determinism() {
        let s = unit_1d();
        let one = sample_sobol(&s, 1, Some(3)).unwrap();
        assert_eq!(one.len(), 1);
        assert!(s.is_valid(&one[0]));
        assert_eq!(sample_sobol(&s, 16, Some(3)).unwrap(), sample_sobol(&s, 16, Some(3)).unwrap());
        assert_ne!(sample_sobol(&s, 16, Some(3)).unwrap(), sample_sobol(&s, 16, Some(4)).unwrap());
    }
}

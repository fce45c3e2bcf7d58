use std::collections::BTreeMap;

use depriv_core::model::{Geoid, Geometry, Polygon};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A perturbed lattice cut into quads and triangles, with holes, sub-snap
/// noise on shared vertices and some multi-part features.
pub fn fixture(rng: &mut ChaCha8Rng, max_polygons: usize) -> BTreeMap<Geoid, Geometry> {
    let cols = rng.random_range(2..=14);
    let rows = rng.random_range(2..=(max_polygons / (2 * cols)).clamp(2, 14));
    let lattice: Vec<Vec<[f64; 2]>> = (0..=rows)
        .map(|r| {
            (0..=cols)
                .map(|c| {
                    [
                        -90.0 + c as f64 * 0.01 + rng.random_range(-0.003..0.003),
                        35.0 + r as f64 * 0.01 + rng.random_range(-0.003..0.003),
                    ]
                })
                .collect()
        })
        .collect();
    let at = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
        let p = lattice[r][c];
        [p[0] + rng.random_range(-3e-8..3e-8), p[1] + rng.random_range(-3e-8..3e-8)]
    };
    let mut parts: Vec<Vec<[f64; 2]>> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if rng.random_bool(0.15) {
                continue;
            }
            let (a, b, cc, d) = (at(r, c, rng), at(r, c + 1, rng), at(r + 1, c + 1, rng), at(r + 1, c, rng));
            match rng.random_range(0..3) {
                0 => parts.push(vec![a, b, cc, d, a]),
                1 => {
                    parts.push(vec![a, b, cc, a]);
                    parts.push(vec![a, cc, d, a]);
                }
                _ => {
                    parts.push(vec![a, b, d, a]);
                    parts.push(vec![b, cc, d, b]);
                }
            }
        }
    }
    parts.shuffle(rng);
    parts.truncate(max_polygons);
    let mut out: BTreeMap<Geoid, Geometry> = BTreeMap::new();
    let mut ids: Vec<usize> = (0..parts.len()).collect();
    ids.shuffle(rng);
    let mut last: Option<Geoid> = None;
    for (ring, id) in parts.into_iter().zip(ids) {
        let poly = Polygon { exterior: ring, interiors: vec![] };
        match last.as_ref() {
            Some(prev) if rng.random_bool(0.1) => out.get_mut(prev).unwrap().polygons.push(poly),
            _ => {
                let g = Geoid::parse(&format!("28{id:010}")).unwrap();
                out.insert(g.clone(), Geometry { geoid: g.clone(), polygons: vec![poly] });
                last = Some(g);
            }
        }
    }
    out
}

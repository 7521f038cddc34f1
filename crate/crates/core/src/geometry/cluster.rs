use std::collections::HashMap;

use nalgebra::Vector3;

/// Single-linkage connected components: two points share a component when
/// a chain of neighbours closer than `linkage` joins them.
///
/// Returns one component index per point; indices are assigned in order of
/// first appearance.
pub fn linkage_components(points: &[Vector3<f64>], linkage: f64) -> Vec<usize> {
    assert!(linkage > 0.0, "linkage distance must be positive");
    let key = |p: &Vector3<f64>| {
        (
            (p.x / linkage).floor() as i64,
            (p.y / linkage).floor() as i64,
            (p.z / linkage).floor() as i64,
        )
    };
    let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }

    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let l2 = linkage * linkage;
    for (i, p) in points.iter().enumerate() {
        let (cx, cy, cz) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = cells.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    for &j in bucket {
                        if j > i && (points[j] - p).norm_squared() < l2 {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            if a != b {
                                parent[a.max(b)] = a.min(b);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut labels = HashMap::new();
    (0..points.len())
        .map(|i| {
            let root = find(&mut parent, i);
            let next = labels.len();
            *labels.entry(root).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chains_link_through_neighbours() {
        let pts: Vec<_> = (0..10).map(|i| Vector3::new(i as f64 * 0.04, 0.0, 0.0)).collect();
        let labels = linkage_components(&pts, 0.05);
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn separated_groups() {
        let mut pts: Vec<_> = (0..5).map(|i| Vector3::new(i as f64 * 0.01, 0.0, 0.0)).collect();
        pts.extend((0..5).map(|i| Vector3::new(1.0 + i as f64 * 0.01, 0.0, 0.0)));
        let labels = linkage_components(&pts, 0.05);
        assert_eq!(labels[..5], [0; 5]);
        assert_eq!(labels[5..], [1; 5]);
    }
}

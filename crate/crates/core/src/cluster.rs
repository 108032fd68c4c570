//! Euclidean cluster extraction: connected components of the graph that
//! links points closer than a distance tolerance.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use core::cmp::Ordering;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: alloc::vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Point indices of each cluster, sorted by descending size and then by
/// lexicographic centroid; indices within a cluster are ascending.
pub fn euclidean_cluster_indices(
    cloud: &PointCloud,
    tolerance: f64,
    min_size: usize,
    max_size: usize,
) -> Result<Vec<Vec<usize>>> {
    if !(tolerance > 0.0) || !tolerance.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("cluster tolerance must be > 0, got {tolerance}")));
    }
    if min_size == 0 {
        return Err(Error::InvalidParameter("min cluster size must be >= 1".into()));
    }
    let pts = cloud.points();
    let cell = |i: usize| -> [i64; 3] {
        let p = pts[i];
        [
            libm::floor(p.x / tolerance) as i64,
            libm::floor(p.y / tolerance) as i64,
            libm::floor(p.z / tolerance) as i64,
        ]
    };
    let mut grid: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for i in 0..pts.len() {
        grid.entry(cell(i)).or_default().push(i);
    }

    let tol2 = tolerance * tolerance;
    let mut sets = DisjointSet::new(pts.len());
    for (key, members) in &grid {
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let nkey = [key[0] + dx, key[1] + dy, key[2] + dz];
                    // visit each unordered cell pair once
                    if nkey < *key {
                        continue;
                    }
                    let Some(others) = grid.get(&nkey) else { continue };
                    let same = nkey == *key;
                    for (a_pos, &a) in members.iter().enumerate() {
                        let start = if same { a_pos + 1 } else { 0 };
                        for &b in &others[start..] {
                            if (pts[a] - pts[b]).norm_squared() < tol2 {
                                sets.union(a, b);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..pts.len() {
        by_root.entry(sets.find(i)).or_default().push(i);
    }
    let mut clusters: Vec<(Vec<usize>, [f64; 3])> = by_root
        .into_values()
        .filter(|c| c.len() >= min_size && c.len() <= max_size)
        .map(|c| {
            let n = c.len() as f64;
            let s = c.iter().fold([0.0; 3], |acc, &i| [acc[0] + pts[i].x, acc[1] + pts[i].y, acc[2] + pts[i].z]);
            (c, [s[0] / n, s[1] / n, s[2] / n])
        })
        .collect();
    clusters.sort_by(|(a, ca), (b, cb)| {
        b.len()
            .cmp(&a.len())
            .then(ca[0].total_cmp(&cb[0]))
            .then(ca[1].total_cmp(&cb[1]))
            .then(ca[2].total_cmp(&cb[2]))
    });
    Ok(clusters.into_iter().map(|(c, _)| c).collect())
}

/// Connected components with `distance < tolerance`, keeping those with
/// `min_size <= size <= max_size`.
pub fn euclidean_cluster(
    cloud: &PointCloud,
    tolerance: f64,
    min_size: usize,
    max_size: usize,
) -> Result<Vec<PointCloud>> {
    Ok(euclidean_cluster_indices(cloud, tolerance, min_size, max_size)?
        .iter()
        .map(|idx| cloud.select(idx))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Frame;
    use alloc::vec;
    use nalgebra::Point3;

    #[test]
    fn close_pair_is_one_cluster() {
        let c = PointCloud::new(Frame::World, vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]).unwrap();
        let cl = euclidean_cluster(&c, 5.0, 1, usize::MAX).unwrap();
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].len(), 2);
    }

    #[test]
    fn separated_blobs() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push(Point3::new(f64::from(i), 0.0, 0.0));
            pts.push(Point3::new(100.0 + f64::from(i), 0.0, 0.0));
        }
        pts.push(Point3::new(100.0, 3.0, 0.0));
        let c = PointCloud::new(Frame::World, pts).unwrap();
        let cl = euclidean_cluster_indices(&c, 10.0, 1, usize::MAX).unwrap();
        assert_eq!(cl.len(), 2);
        // larger blob first
        assert_eq!(cl[0].len(), 6);
        assert!(c.points()[cl[0][0]].x >= 100.0);
    }

    #[test]
    fn size_filter_and_tie_order() {
        let pts = vec![
            Point3::new(50.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(200.0, 0.0, 0.0),
            Point3::new(201.0, 0.0, 0.0),
            Point3::new(202.0, 0.0, 0.0),
        ];
        let c = PointCloud::new(Frame::World, pts).unwrap();
        let cl = euclidean_cluster_indices(&c, 2.0, 1, 2).unwrap();
        // the 3-point cluster is too big; singletons ordered by centroid x
        assert_eq!(cl, vec![vec![1], vec![0]]);
        assert!(euclidean_cluster_indices(&c, 0.0, 1, 2).is_err());
        assert!(euclidean_cluster_indices(&c, 1.0, 0, 2).is_err());
    }

    #[test]
    fn distance_equal_to_tolerance_does_not_link() {
        let c = PointCloud::new(Frame::World, vec![Point3::new(0.0, 0.0, 0.0), Point3::new(4.0, 0.0, 0.0)]).unwrap();
        assert_eq!(euclidean_cluster_indices(&c, 4.0, 1, 10).unwrap().len(), 2);
    }
}

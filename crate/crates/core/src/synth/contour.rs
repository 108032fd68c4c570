//! Oracle segmentation: pixel sets to mask contours.
//!
//! Contours run along pixel edges. Vertex `[i, j]` is the corner shared by
//! pixels `(i-1, j-1)` and `(i, j)`, i.e. image point `(i - 0.5, j - 0.5)`,
//! so the polygon of a traced contour contains exactly the pixel centers
//! of the traced region (when the region has no holes).

use alloc::vec;
use alloc::vec::Vec;

/// Row-major boolean pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelSet {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl PixelSet {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![false; width as usize * height as usize] }
    }

    pub fn get(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && u < i64::from(self.width) && v < i64::from(self.height) && self.data[self.index(u, v)]
    }

    pub fn set(&mut self, u: u32, v: u32, value: bool) {
        let i = self.index(i64::from(u), i64::from(v));
        self.data[i] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    fn index(&self, u: i64, v: i64) -> usize {
        v as usize * self.width as usize + u as usize
    }

    /// 4-connected components, largest first; ties keep raster order of
    /// their first pixel.
    pub fn components(&self) -> Vec<PixelSet> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut seen = vec![false; w * h];
        let mut comps: Vec<(usize, PixelSet)> = Vec::new();
        let mut stack = Vec::new();
        for start in 0..w * h {
            if !self.data[start] || seen[start] {
                continue;
            }
            let mut comp = PixelSet::new(self.width, self.height);
            let mut size = 0;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                comp.data[i] = true;
                size += 1;
                let (u, v) = (i % w, i / w);
                let mut visit = |j: usize| {
                    if self.data[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if u > 0 {
                    visit(i - 1);
                }
                if u + 1 < w {
                    visit(i + 1);
                }
                if v > 0 {
                    visit(i - w);
                }
                if v + 1 < h {
                    visit(i + w);
                }
            }
            comps.push((size, comp));
        }
        comps.sort_by(|a, b| b.0.cmp(&a.0));
        comps.into_iter().map(|(_, c)| c).collect()
    }
}

/// Outer boundary of a 4-connected pixel set, starting at the top-left
/// corner of its first pixel in raster order and running with the region
/// on the right (clockwise on screen). Every unit step contributes a
/// vertex. Diagonal-only contacts are not crossed. Empty for an empty set.
pub fn trace_outer_contour(set: &PixelSet) -> Vec<[i32; 2]> {
    let Some(first) = set.data.iter().position(|&b| b) else {
        return Vec::new();
    };
    let w = set.width as usize;
    let start = [(first % w) as i64, (first / w) as i64];
    // directions E, S, W, N in y-down image coordinates
    const DIRS: [[i64; 2]; 4] = [[1, 0], [0, 1], [-1, 0], [0, -1]];
    let mut pos = start;
    let mut dir = 0usize;
    let mut out = Vec::new();
    loop {
        out.push([pos[0] as i32, pos[1] as i32]);
        pos = [pos[0] + DIRS[dir][0], pos[1] + DIRS[dir][1]];
        if pos == start {
            break;
        }
        let (ahead_left, ahead_right) = ahead_pixels(pos, dir);
        if !set.get(ahead_right[0], ahead_right[1]) {
            dir = (dir + 1) % 4;
        } else if set.get(ahead_left[0], ahead_left[1]) {
            dir = (dir + 3) % 4;
        }
    }
    out
}

/// The two pixels in front of a lattice vertex for a heading.
fn ahead_pixels(pos: [i64; 2], dir: usize) -> ([i64; 2], [i64; 2]) {
    let [i, j] = pos;
    // pixel (a, b) has corners (a, b)..(a+1, b+1)
    match dir {
        0 => ([i, j - 1], [i, j]),
        1 => ([i, j], [i - 1, j]),
        2 => ([i - 1, j], [i - 1, j - 1]),
        _ => ([i - 1, j - 1], [i, j - 1]),
    }
}

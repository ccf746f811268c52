use crate::model::PlantConstraints;

/// One linear piece of a concave generation hull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullSegment {
    pub start: f64,
    pub end: f64,
    /// Generation per unit of discharge on this piece.
    pub slope: f64,
}

impl HullSegment {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// Relative slope difference below which adjacent pieces are merged.
const SLOPE_TOL: f64 = 1e-12;

/// Upper concave envelope of a plant's `(level, generation)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveHull {
    /// Envelope vertices in increasing discharge; collinear points removed.
    pub vertices: Vec<(f64, f64)>,
}

impl ConcaveHull {
    pub fn of(plant: &PlantConstraints) -> Self {
        let mut vertices: Vec<(f64, f64)> = Vec::with_capacity(plant.levels.len());
        for (&x, &y) in plant.levels.iter().zip(&plant.generation) {
            while vertices.len() >= 2 {
                let (x1, y1) = vertices[vertices.len() - 2];
                let (x2, y2) = vertices[vertices.len() - 1];
                // drop the middle point when it lies on or below the chord;
                // rounding must not leave two pieces of equal slope
                let left = (y2 - y1) / (x2 - x1);
                let right = (y - y2) / (x - x2);
                if left <= right + SLOPE_TOL * left.abs().max(right.abs()).max(1.0) {
                    vertices.pop();
                } else {
                    break;
                }
            }
            vertices.push((x, y));
        }
        ConcaveHull { vertices }
    }

    pub fn tmin(&self) -> f64 {
        self.vertices[0].0
    }

    pub fn tmax(&self) -> f64 {
        self.vertices[self.vertices.len() - 1].0
    }

    /// Generation at the minimum discharge.
    pub fn base(&self) -> f64 {
        self.vertices[0].1
    }

    /// Pieces with strictly decreasing slopes.
    pub fn segments(&self) -> Vec<HullSegment> {
        let segs: Vec<HullSegment> = self
            .vertices
            .windows(2)
            .map(|w| HullSegment {
                start: w[0].0,
                end: w[1].0,
                slope: (w[1].1 - w[0].1) / (w[1].0 - w[0].0),
            })
            .collect();
        assert!(
            segs.windows(2).all(|w| w[0].slope > w[1].slope),
            "concave hull slopes must decrease"
        );
        segs
    }

    pub fn value(&self, discharge: f64) -> f64 {
        let v = &self.vertices;
        if discharge <= v[0].0 {
            return v[0].1;
        }
        for w in v.windows(2) {
            if discharge <= w[1].0 {
                let f = (discharge - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + f * (w[1].1 - w[0].1);
            }
        }
        v[v.len() - 1].1
    }
}

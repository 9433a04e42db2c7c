//! Deterministic synthetic scenario generation and the on-disk interchange
//! format.
//!
//! Scenarios are rolled with a kinematic bicycle model on the 2 Hz grid and
//! come with a matching vector map whose drivable area contains the
//! ground-truth path. The generator stands in for a real drive log at desk
//! scale.

mod dataset;
mod generator;
mod io;
mod split;

pub use dataset::{generate_dataset, DatasetSpec};
pub use generator::{generate_scenario, ScenarioKind, ScenarioSpec};
pub use io::{read_samples, read_samples_normalized, write_samples, InterchangeError};
pub use split::{make_split, DatasetSplit, SplitError};

use serde::{Deserialize, Serialize};

use crate::scene::{Point2, Violation};

/// Static environment geometry: drivable area, lanes, crosswalks, sidewalks.
///
/// Polygons are stored without a repeated closing vertex; closure is
/// implicit. Multiple drivable polygons are interpreted as a union.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VectorMap {
    pub drivable_polygons: Vec<Vec<Point2>>,
    /// Directed polylines, tail to head in the driving direction.
    pub lane_centerlines: Vec<Vec<Point2>>,
    pub crosswalks: Vec<Vec<Point2>>,
    pub sidewalks: Vec<Vec<Point2>>,
}

impl VectorMap {
    /// Applies a point transform to every vertex, preserving structure.
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> VectorMap {
        let conv = |polys: &Vec<Vec<Point2>>| -> Vec<Vec<Point2>> {
            polys
                .iter()
                .map(|poly| poly.iter().map(|p| f(*p)).collect())
                .collect()
        };
        VectorMap {
            drivable_polygons: conv(&self.drivable_polygons),
            lane_centerlines: conv(&self.lane_centerlines),
            crosswalks: conv(&self.crosswalks),
            sidewalks: conv(&self.sidewalks),
        }
    }

    pub(crate) fn collect_violations(&self, ctx: &str, out: &mut Vec<Violation>) {
        let check_poly = |name: &str, polys: &[Vec<Point2>], out: &mut Vec<Violation>| {
            for (i, poly) in polys.iter().enumerate() {
                let field = format!("{ctx}.{name}[{i}]");
                if poly.len() < 3 {
                    out.push(Violation {
                        field,
                        message: "polygon needs >= 3 vertices".into(),
                    });
                    continue;
                }
                if poly.iter().any(|p| !p.is_finite()) {
                    out.push(Violation {
                        field,
                        message: "non-finite vertex".into(),
                    });
                    continue;
                }
                if !polygon_is_simple(poly) {
                    out.push(Violation {
                        field,
                        message: "polygon self-intersects".into(),
                    });
                }
            }
        };
        check_poly("drivable_polygons", &self.drivable_polygons, out);
        check_poly("crosswalks", &self.crosswalks, out);
        check_poly("sidewalks", &self.sidewalks, out);
        for (i, line) in self.lane_centerlines.iter().enumerate() {
            let field = format!("{ctx}.lane_centerlines[{i}]");
            if line.len() < 2 {
                out.push(Violation {
                    field,
                    message: "polyline needs >= 2 vertices".into(),
                });
            } else if line.iter().any(|p| !p.is_finite()) {
                out.push(Violation {
                    field,
                    message: "non-finite vertex".into(),
                });
            }
        }
    }
}

/// Proper-intersection test between non-adjacent edges; shared endpoints of
/// adjacent edges do not count.
pub(crate) fn polygon_is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let edge = |i: usize| (poly[i], poly[(i + 1) % n]);
    for i in 0..n {
        for j in (i + 1)..n {
            // skip adjacent edges (including the wrap-around pair)
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = edge(i);
            let (c, d) = edge(j);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2| {
        orient(p, q, r) == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(c, d, a) || on(c, d, b) || on(a, b, c) || on(a, b, d)
}

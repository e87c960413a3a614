//! Measured-versus-predicted end points. The measured point is the E1/E2
//! corner of the end module; predictions run forward kinematics along the
//! tree path from the root.
//!
//! CSV layout: `label,theta_0,...,theta_{n-1},x_mm,y_mm`, angles in degrees.

use std::io::{Read, Write};

use rhombot_core::geometry::deg;
use rhombot_core::kinematics::{e1_e2_vertex, outward_edge_frame};
use rhombot_core::{EdgeIndex, KTree, ModuleId, ModuleState, Point2, Pose2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRow {
    pub label: String,
    /// One folding angle per chain module, rad.
    pub thetas: Vec<f64>,
    /// Measured end point, m.
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSeries {
    pub rows: Vec<MeasurementRow>,
}

/// Serial chain from the root to an end module: each module with the label
/// of the edge its successor attaches to.
#[derive(Debug, Clone)]
pub struct Chain {
    pub base: Pose2,
    pub links: Vec<(ModuleState, Option<EdgeIndex>)>,
}

impl Chain {
    pub fn from_tree(tree: &KTree, end: ModuleId) -> Result<Chain> {
        let path = tree.path_from_root(end)?;
        let mut links = Vec::with_capacity(path.len());
        for (i, id) in path.iter().enumerate() {
            let state = *tree.module(*id)?;
            let next = match path.get(i + 1) {
                Some(child) => {
                    let (parent, edge) = tree
                        .parent_of(*child)
                        .expect("every non-root path module has a parent");
                    debug_assert_eq!(parent, *id);
                    Some(edge)
                }
                None => None,
            };
            links.push((state, next));
        }
        Ok(Chain {
            base: tree.base(),
            links,
        })
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn modules(&self) -> Vec<ModuleId> {
        self.links.iter().map(|(s, _)| s.id).collect()
    }

    /// End point for the given folding angles, one per chain module.
    pub fn predict(&self, thetas: &[f64]) -> Result<Point2> {
        if thetas.len() != self.links.len() {
            return Err(Error::semantic(
                "thetas",
                format!("chain has {} modules, got {} angles", self.links.len(), thetas.len()),
            ));
        }
        let mut pose = self.base;
        let mut end = None;
        for ((state, next), theta) in self.links.iter().zip(thetas) {
            let mut s = *state;
            s.set_theta(*theta);
            match next {
                Some(k) => pose = pose.compose(&outward_edge_frame(&s, *k)),
                None => end = Some(pose.transform_point(e1_e2_vertex(&s))),
            }
        }
        end.ok_or_else(|| Error::semantic("chain", "empty chain"))
    }
}

pub fn read_series<R: Read>(input: R) -> Result<MeasurementSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let n = headers.len();
    let bad_header = || Error::Measurement {
        row: 0,
        message: format!("expected header label,theta_0..,x_mm,y_mm, got {:?}", headers.iter().collect::<Vec<_>>()),
    };
    if n < 4 || &headers[0] != "label" || &headers[n - 2] != "x_mm" || &headers[n - 1] != "y_mm" {
        return Err(bad_header());
    }
    for (i, h) in headers.iter().enumerate().take(n - 2).skip(1) {
        if h != format!("theta_{}", i - 1) {
            return Err(bad_header());
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|e| Error::Measurement {
                row,
                message: format!("column {}: {e}", &headers[j]),
            })
        };
        rows.push(MeasurementRow {
            label: rec[0].to_owned(),
            thetas: (1..n - 2).map(|j| num(j).map(deg)).collect::<Result<_>>()?,
            x: num(n - 2)? / 1000.0,
            y: num(n - 1)? / 1000.0,
        });
    }
    Ok(MeasurementSeries { rows })
}

pub fn write_series<W: Write>(out: W, series: &MeasurementSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = series.rows.first().map_or(0, |r| r.thetas.len());
    let mut header = vec!["label".to_owned()];
    header.extend((0..n).map(|i| format!("theta_{i}")));
    header.extend(["x_mm".to_owned(), "y_mm".to_owned()]);
    w.write_record(&header)?;
    for r in &series.rows {
        let mut rec = vec![r.label.clone()];
        rec.extend(r.thetas.iter().map(|t| format!("{}", t.to_degrees())));
        rec.push(format!("{}", r.x * 1000.0));
        rec.push(format!("{}", r.y * 1000.0));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<measurements>", e))
}

/// Per-axis root-mean-square error between measured and predicted end
/// points, m.
pub fn evaluate_rmse(series: &MeasurementSeries, chain: &Chain) -> Result<(f64, f64)> {
    if series.rows.is_empty() {
        return Err(Error::Measurement {
            row: 0,
            message: "no rows".into(),
        });
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for (i, r) in series.rows.iter().enumerate() {
        let row = i + 1;
        if r.thetas.len() != chain.len() {
            return Err(Error::Measurement {
                row,
                message: format!("{} angles for a {}-module chain", r.thetas.len(), chain.len()),
            });
        }
        for ((state, _), t) in chain.links.iter().zip(&r.thetas) {
            if !state.params.theta_in_range(*t) {
                return Err(Error::Measurement {
                    row,
                    message: format!("M{}: theta {:.3} deg outside limits", state.id.0, t.to_degrees()),
                });
            }
        }
        let p = chain.predict(&r.thetas)?;
        sx += (r.x - p.x).powi(2);
        sy += (r.y - p.y).powi(2);
    }
    let n = series.rows.len() as f64;
    Ok(((sx / n).sqrt(), (sy / n).sqrt()))
}

//! Detection rate at a distance threshold (AP@10cm), its mean over joints,
//! and body-part grouping.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::types::{distance, Point3, Pose};

pub const DEFAULT_THRESHOLD: f64 = 0.10;

/// Body-part groups; left and right joints share a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BodyGroup {
    Head,
    NeckChest,
    Shoulders,
    Elbows,
    Hands,
    Torso,
    Hips,
    Knees,
    Feet,
}

impl BodyGroup {
    pub const ALL: [BodyGroup; 9] = [
        BodyGroup::Head,
        BodyGroup::NeckChest,
        BodyGroup::Shoulders,
        BodyGroup::Elbows,
        BodyGroup::Hands,
        BodyGroup::Torso,
        BodyGroup::Hips,
        BodyGroup::Knees,
        BodyGroup::Feet,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BodyGroup::Head => "Head",
            BodyGroup::NeckChest => "Neck/Chest",
            BodyGroup::Shoulders => "Shoulders",
            BodyGroup::Elbows => "Elbows",
            BodyGroup::Hands => "Hands",
            BodyGroup::Torso => "Torso",
            BodyGroup::Hips => "Hips",
            BodyGroup::Knees => "Knees",
            BodyGroup::Feet => "Feet",
        }
    }

    /// Group of a joint name such as `l_shoulder` or `Right Knee`.
    pub fn of_joint(name: &str) -> Option<BodyGroup> {
        let n = name.to_ascii_lowercase();
        let table: [(&[&str], BodyGroup); 9] = [
            (&["head"], BodyGroup::Head),
            (&["neck", "chest"], BodyGroup::NeckChest),
            (&["shoulder"], BodyGroup::Shoulders),
            (&["elbow"], BodyGroup::Elbows),
            (&["hand", "wrist"], BodyGroup::Hands),
            (&["torso"], BodyGroup::Torso),
            (&["hip"], BodyGroup::Hips),
            (&["knee"], BodyGroup::Knees),
            (&["foot", "feet", "ankle"], BodyGroup::Feet),
        ];
        table
            .iter()
            .find(|(keys, _)| keys.iter().any(|k| n.contains(k)))
            .map(|(_, g)| *g)
    }

    pub fn is_upper(self) -> bool {
        matches!(
            self,
            BodyGroup::Head | BodyGroup::NeckChest | BodyGroup::Shoulders | BodyGroup::Elbows | BodyGroup::Hands
        )
    }

    pub fn is_lower(self) -> bool {
        matches!(self, BodyGroup::Hips | BodyGroup::Knees | BodyGroup::Feet)
    }
}

/// 1 if the joints are strictly closer than `threshold`, else 0.
pub fn ap(pred: &Point3, gt: &Point3, threshold: f64) -> u8 {
    u8::from(distance(pred, gt) < threshold)
}

/// All values in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub threshold: f64,
    pub frames: usize,
    pub per_joint_ap: Vec<(String, f64)>,
    /// Groups present in the joint schema, in canonical order.
    pub group_ap: Vec<(BodyGroup, f64)>,
    /// Joint-weighted mean over upper-body joints.
    pub upper_body: Option<f64>,
    /// Joint-weighted mean over lower-body joints.
    pub lower_body: Option<f64>,
    /// Mean over all joints.
    pub mean: f64,
}

impl EvalReport {
    pub fn group(&self, g: BodyGroup) -> Option<f64> {
        self.group_ap.iter().find(|(h, _)| *h == g).map(|(_, v)| *v)
    }

    pub fn joint(&self, name: &str) -> Option<f64> {
        self.per_joint_ap.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Rows `(label, percent)`: groups, then upper, lower and mean.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = self
            .group_ap
            .iter()
            .map(|(g, v)| (g.label().to_string(), *v))
            .collect();
        if let Some(v) = self.upper_body {
            rows.push(("Upper Body".into(), v));
        }
        if let Some(v) = self.lower_body {
            rows.push(("Lower Body".into(), v));
        }
        rows.push(("Mean".into(), self.mean));
        rows
    }

    /// `group,ap` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("group,ap\n");
        for (label, v) in self.rows() {
            let _ = writeln!(s, "{label},{v:.2}");
        }
        s
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.per_joint_ap.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(
            f,
            "mAP@{:.0}cm over {} frames, {} joints: {}",
            self.threshold * 100.0,
            self.frames,
            names.len(),
            names.join(" ")
        )?;
        let rows = self.rows();
        let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        for (label, v) in rows {
            writeln!(f, "{label:<width$}  {v:>6.2}")?;
        }
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-joint detection rates over all frames and their groupings.
pub fn map_score(preds: &[Pose], gts: &[Pose], threshold: f64) -> Result<EvalReport> {
    if preds.len() != gts.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} ground-truth frames",
            preds.len(),
            gts.len()
        )));
    }
    let first = gts.first().ok_or(Error::Empty("evaluation frames"))?;
    let names = &first.joint_names;
    for p in preds.iter().chain(gts) {
        if &p.joint_names != names {
            return Err(Error::Shape(format!(
                "joint schema mismatch: {:?} vs {:?}",
                p.joint_names, names
            )));
        }
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }

    let frames = gts.len();
    let per_joint: Vec<f64> = (0..names.len())
        .map(|j| {
            let hits: usize = preds
                .iter()
                .zip(gts)
                .map(|(p, g)| ap(&p.joints[j], &g.joints[j], threshold) as usize)
                .sum();
            100.0 * hits as f64 / frames as f64
        })
        .collect();
    let groups: Vec<Option<BodyGroup>> = names.iter().map(|n| BodyGroup::of_joint(n)).collect();

    let group_ap = BodyGroup::ALL
        .iter()
        .filter_map(|&g| {
            mean(per_joint.iter().zip(&groups).filter(|(_, h)| **h == Some(g)).map(|(v, _)| *v)).map(|v| (g, v))
        })
        .collect();
    let pick = |pred: fn(BodyGroup) -> bool| {
        mean(
            per_joint
                .iter()
                .zip(&groups)
                .filter(|(_, h)| h.is_some_and(pred))
                .map(|(v, _)| *v),
        )
    };

    Ok(EvalReport {
        threshold,
        frames,
        per_joint_ap: names.iter().cloned().zip(per_joint.iter().copied()).collect(),
        group_ap,
        upper_body: pick(BodyGroup::is_upper),
        lower_body: pick(BodyGroup::is_lower),
        mean: mean(per_joint.iter().copied()).unwrap_or(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PoseSpace;

    fn pose(names: &[&str], joints: Vec<Point3>) -> Pose {
        Pose::new(joints, names.iter().map(|s| s.to_string()).collect(), PoseSpace::Camera).unwrap()
    }

    #[test]
    fn ap_threshold_is_strict() {
        let o = [0.0, 0.0, 0.0];
        assert_eq!(ap(&[0.09, 0.0, 0.0], &o, 0.10), 1);
        assert_eq!(ap(&[0.0, 0.11, 0.0], &o, 0.10), 0);
        assert_eq!(ap(&[0.0, 0.0, 0.10], &o, 0.10), 0);
    }

    #[test]
    fn exact_predictions_score_100() {
        let names = ["head", "l_hand", "r_knee", "torso"];
        let g = pose(&names, vec![[0.0, 1.0, 3.0], [0.3, 0.2, 3.0], [0.1, -0.5, 3.0], [0.0, 0.3, 3.0]]);
        let r = map_score(std::slice::from_ref(&g), std::slice::from_ref(&g), 0.1).unwrap();
        assert!(r.rows().iter().all(|(_, v)| *v == 100.0));
        assert_eq!(r.group(BodyGroup::Torso), Some(100.0));
    }

    #[test]
    fn half_detected_gives_50() {
        let names = ["head", "neck"];
        let g = pose(&names, vec![[0.0; 3], [0.0, 0.2, 0.0]]);
        let miss = pose(&names, vec![[1.0, 0.0, 0.0], [1.0, 0.2, 0.0]]);
        let r = map_score(&[g.clone(), miss], &[g.clone(), g], 0.1).unwrap();
        assert_eq!(r.mean, 50.0);
        assert_eq!(r.joint("neck"), Some(50.0));
    }

    #[test]
    fn symmetric_joints_pool_and_torso_is_only_in_mean() {
        let names = ["l_hip", "r_hip", "torso"];
        let g = pose(&names, vec![[0.0; 3], [0.2, 0.0, 0.0], [0.1, 0.3, 0.0]]);
        let p = pose(&names, vec![[0.0; 3], [0.6, 0.0, 0.0], [0.1, 0.3, 0.0]]);
        let r = map_score(&[p], &[g], 0.1).unwrap();
        assert_eq!(r.group(BodyGroup::Hips), Some(50.0));
        assert_eq!(r.lower_body, Some(50.0));
        assert_eq!(r.upper_body, None);
        assert!((r.mean - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let a = pose(&["head"], vec![[0.0; 3]]);
        let b = pose(&["neck"], vec![[0.0; 3]]);
        assert!(map_score(std::slice::from_ref(&a), &[b], 0.1).is_err());
        assert!(map_score(&[a.clone(), a.clone()], &[a], 0.1).is_err());
        assert!(map_score(&[], &[], 0.1).is_err());
    }

    #[test]
    fn group_names() {
        assert_eq!(BodyGroup::of_joint("R_Shoulder"), Some(BodyGroup::Shoulders));
        assert_eq!(BodyGroup::of_joint("chest"), Some(BodyGroup::NeckChest));
        assert_eq!(BodyGroup::of_joint("l_foot"), Some(BodyGroup::Feet));
        assert_eq!(BodyGroup::of_joint("tail"), None);
    }

    #[test]
    fn csv_and_text() {
        let g = pose(&["head", "l_knee"], vec![[0.0; 3], [1.0, 0.0, 0.0]]);
        let r = map_score(std::slice::from_ref(&g), std::slice::from_ref(&g), 0.1).unwrap();
        assert_eq!(
            r.to_csv(),
            "group,ap\nHead,100.00\nKnees,100.00\nUpper Body,100.00\nLower Body,100.00\nMean,100.00\n"
        );
        let text = r.to_string();
        assert!(text.contains("head l_knee"));
        assert!(text.contains("Lower Body  100.00"));
    }

    /// Published per-part results of the method reproduce its summary rows
    /// when upper and lower body are averaged over individual joints.
    #[test]
    fn published_summary_rows_are_joint_weighted() {
        fn check(rows: &[(&str, f64)], upper: f64, lower: f64, mean_all: f64) {
            let names: Vec<String> = rows
                .iter()
                .flat_map(|(g, _)| match *g {
                    "head" | "neck" | "torso" | "chest" => vec![g.to_string()],
                    other => vec![format!("l_{other}"), format!("r_{other}")],
                })
                .collect();
            let value = |n: &str| rows.iter().find(|(g, _)| n.ends_with(g)).unwrap().1;
            let per: Vec<(Option<BodyGroup>, f64)> =
                names.iter().map(|n| (BodyGroup::of_joint(n), value(n))).collect();
            let avg = |f: &dyn Fn(BodyGroup) -> bool| {
                let v: Vec<f64> = per.iter().filter(|(g, _)| g.is_some_and(f)).map(|(_, v)| *v).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            assert!((avg(&BodyGroup::is_upper) - upper).abs() < 0.01);
            assert!((avg(&BodyGroup::is_lower) - lower).abs() < 0.01);
            let all = per.iter().map(|(_, v)| v).sum::<f64>() / per.len() as f64;
            assert!((all - mean_all).abs() < 0.01);
        }
        let front = [
            ("head", 96.73),
            ("neck", 98.05),
            ("shoulder", 94.38),
            ("elbow", 73.67),
            ("hand", 54.95),
            ("torso", 98.35),
            ("hip", 91.77),
            ("knee", 90.74),
            ("foot", 86.30),
        ];
        check(&front, 80.10, 89.60, 85.11);
        let top = [
            ("head", 96.13),
            ("neck", 97.61),
            ("shoulder", 93.08),
            ("elbow", 70.83),
            ("hand", 48.41),
            ("torso", 95.58),
            ("hip", 84.50),
            ("knee", 79.19),
            ("foot", 67.76),
        ];
        check(&top, 77.30, 77.15, 78.46);
        // 14-joint schema: chest instead of neck, no torso, hips kept
        let chest = [
            ("head", 88.93),
            ("chest", 96.87),
            ("shoulder", 86.14),
            ("elbow", 75.11),
            ("hand", 63.07),
            ("hip", 83.20),
            ("knee", 82.68),
            ("foot", 82.94),
        ];
        check(&chest, 79.31, 82.94, 80.86);
    }
}

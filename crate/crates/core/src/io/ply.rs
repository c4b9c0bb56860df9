//! ASCII PLY export for clouds with an optional joint overlay.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{PointCloud, Pose};

const CLOUD_RGB: [u8; 3] = [200, 200, 200];
const JOINT_RGB: [u8; 3] = [255, 0, 0];

/// Writes `cloud` as PLY vertices. When `pose` is given its joints are
/// appended as extra vertices and every vertex carries an RGB color, joints
/// in pure red.
pub fn write_ply(cloud: &PointCloud, pose: Option<&Pose>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ply_to(&mut w, cloud, pose)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_ply_to<W: Write>(w: &mut W, cloud: &PointCloud, pose: Option<&Pose>) -> std::io::Result<()> {
    let joints = pose.map_or(0, |p| p.len());
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len() + joints)?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    if pose.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    writeln!(w, "end_header")?;
    match pose {
        None => {
            for p in &cloud.points {
                writeln!(w, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32)?;
            }
        }
        Some(pose) => {
            let colored = cloud
                .points
                .iter()
                .map(|p| (p, CLOUD_RGB))
                .chain(pose.joints.iter().map(|j| (j, JOINT_RGB)));
            for (p, [r, g, b]) in colored {
                writeln!(
                    w,
                    "{} {} {} {r} {g} {b}",
                    p[0] as f32, p[1] as f32, p[2] as f32
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PoseSpace;

    fn render(cloud: &PointCloud, pose: Option<&Pose>) -> String {
        let mut buf = Vec::new();
        write_ply_to(&mut buf, cloud, pose).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn single_point_header() {
        let text = render(&PointCloud::new(vec![[1.0, 2.0, 3.0]]), None);
        assert!(text.contains("element vertex 1\n"));
        assert!(text.ends_with("end_header\n1 2 3\n"));
    }

    #[test]
    fn joints_are_appended_in_red() {
        let cloud = PointCloud::new(vec![[0.0; 3]; 4]);
        let names = (0..15).map(|i| format!("j{i}")).collect();
        let pose = Pose::new(vec![[1.0; 3]; 15], names, PoseSpace::Camera).unwrap();
        let text = render(&cloud, Some(&pose));
        assert!(text.contains("element vertex 19\n"));
        assert_eq!(text.lines().filter(|l| l.ends_with("255 0 0")).count(), 15);
    }
}

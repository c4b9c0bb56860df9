use crate::error::{Error, Result};

/// Architecture hyperparameters. Hidden widths are divided by
/// `channel_scale`; the final `3 * m_joints` output width never is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetConfig {
    pub n_points: usize,
    pub k_neighbors: usize,
    pub m_joints: usize,
    pub edgeconv_channels: usize,
    pub unit_mlp_channels: usize,
    /// Head widths; the last entry must be `3 * m_joints`.
    pub fc_sizes: Vec<usize>,
    /// Recompute kNN in feature space for deeper EdgeConv layers.
    pub dynamic_graph: bool,
    pub channel_scale: usize,
    /// Feed the head with both units' pooled features (else only unit 2).
    pub pool_both_units: bool,
}

pub(crate) const TNET_EDGE_CHANNELS: [usize; 2] = [64, 128];
pub(crate) const TNET_POINT_CHANNELS: usize = 1024;
pub(crate) const TNET_FC_CHANNELS: [usize; 2] = [512, 256];

impl NetConfig {
    /// Full-width network: N = 5000, K = 16, 128-filter EdgeConvs, 1024-wide
    /// unit MLPs and a 1024/512/3M head.
    pub fn full(m_joints: usize) -> Self {
        Self {
            n_points: 5000,
            k_neighbors: 16,
            m_joints,
            edgeconv_channels: 128,
            unit_mlp_channels: 1024,
            fc_sizes: vec![1024, 512, 3 * m_joints],
            dynamic_graph: true,
            channel_scale: 1,
            pool_both_units: true,
        }
    }

    /// Reduced configuration for CPU-sized experiments.
    pub fn desk(n_points: usize, k_neighbors: usize, m_joints: usize, channel_scale: usize) -> Self {
        Self {
            n_points,
            k_neighbors,
            channel_scale,
            ..Self::full(m_joints)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("n_points", self.n_points),
            ("k_neighbors", self.k_neighbors),
            ("m_joints", self.m_joints),
            ("edgeconv_channels", self.edgeconv_channels),
            ("unit_mlp_channels", self.unit_mlp_channels),
            ("channel_scale", self.channel_scale),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if self.n_points <= self.k_neighbors {
            return Err(Error::InvalidArgument(format!(
                "n_points ({}) must exceed k_neighbors ({})",
                self.n_points, self.k_neighbors
            )));
        }
        match self.fc_sizes.last() {
            Some(&last) if last == 3 * self.m_joints && self.fc_sizes.iter().all(|&s| s > 0) => Ok(()),
            _ => Err(Error::InvalidArgument(format!(
                "fc_sizes {:?} must be positive and end with 3*m_joints = {}",
                self.fc_sizes,
                3 * self.m_joints
            ))),
        }
    }

    pub(crate) fn scaled(&self, width: usize) -> usize {
        (width / self.channel_scale).max(1)
    }

    pub(crate) fn edge_width(&self) -> usize {
        self.scaled(self.edgeconv_channels)
    }

    pub(crate) fn unit_width(&self) -> usize {
        self.scaled(self.unit_mlp_channels)
    }

    /// Head layer widths after scaling (output layer unscaled).
    pub(crate) fn head_widths(&self) -> Vec<usize> {
        let last = self.fc_sizes.len() - 1;
        self.fc_sizes
            .iter()
            .enumerate()
            .map(|(i, &w)| if i == last { w } else { self.scaled(w) })
            .collect()
    }
}

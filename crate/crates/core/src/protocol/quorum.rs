use super::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("N must be at least 1")]
    NoNodes,
    #[error("k={k} outside 1..=N-2(f+e) = 1..={max}")]
    BadK { k: usize, max: i64 },
    #[error("quorum of {q} servers cannot be met with {f} crashes among {n}")]
    Unavailable { q: usize, f: usize, n: usize },
}

/// System parameters: N nodes, at most f crashed and e malicious servers,
/// code dimension k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuorumConfig {
    pub n: usize,
    pub f: usize,
    pub e: usize,
    pub k: usize,
}

impl QuorumConfig {
    pub fn new(n: usize, f: usize, e: usize, k: usize) -> Result<QuorumConfig, ConfigError> {
        let cfg = QuorumConfig { n, f, e, k };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::NoNodes);
        }
        let max = self.n as i64 - 2 * (self.f + self.e) as i64;
        if self.k == 0 || self.k as i64 > max {
            return Err(ConfigError::BadK { k: self.k, max });
        }
        let q = self.quorum_size();
        if self.n - self.f < q {
            return Err(ConfigError::Unavailable { q, f: self.f, n: self.n });
        }
        Ok(())
    }

    /// ceil((N + k + 2e) / 2)
    pub fn quorum_size(&self) -> usize {
        (self.n + self.k + 2 * self.e).div_ceil(2)
    }

    pub fn is_quorum_size(&self, size: usize) -> bool {
        size >= self.quorum_size()
    }

    /// A set of distinct valid server ids forms a quorum.
    pub fn is_quorum(&self, set: &[NodeId]) -> bool {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for id in set {
            let i = id.0 as usize;
            if (1..=self.n).contains(&i) && !seen[i - 1] {
                seen[i - 1] = true;
                count += 1;
            }
        }
        self.is_quorum_size(count)
    }

    /// Number of coded elements a reader needs before decoding.
    pub fn k_threshold(&self) -> usize {
        self.k + 2 * self.e
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.n as u32).map(NodeId)
    }
}

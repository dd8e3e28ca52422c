//! Pipeline switches and the shared worker pool.

use crate::error::{Error, Result};

/// Loss-term switches shared by both pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ablation {
    pub no_rdp_loss: bool,
    pub no_aux_loss: bool,
    pub no_boosting: bool,
}

impl Ablation {
    pub const NONE: Ablation = Ablation {
        no_rdp_loss: false,
        no_aux_loss: false,
        no_boosting: false,
    };

    pub fn validate(&self) -> Result<()> {
        if self.no_rdp_loss && self.no_aux_loss {
            return Err(Error::NoLossEnabled);
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if self.no_rdp_loss {
            parts.push("no_rdp_loss");
        }
        if self.no_aux_loss {
            parts.push("no_aux_loss");
        }
        if self.no_boosting {
            parts.push("no_boosting");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

/// Runs `f` inside a pool of `workers` threads; 0 uses the global pool.
pub(crate) fn run_in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}


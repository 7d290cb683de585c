//! High-fidelity region metrics for robustness maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::table::ResultTable;

/// Fidelity threshold of the high-fidelity region.
pub const REGION_THRESHOLD: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMetric {
    pub policy: String,
    pub grid_points: usize,
    /// Grid points whose realization-averaged fidelity exceeds the threshold.
    pub region_count: usize,
    /// 100·(count − baseline)/baseline; absent when the baseline region is empty.
    pub improvement_pct: Option<f64>,
}

/// Grid points whose mean fidelity exceeds `threshold`.
pub fn region_count(table: &ResultTable, threshold: f64) -> usize {
    table.mean_fidelity().iter().filter(|(_, f)| *f > threshold).count()
}

/// Fails unless both tables share grid, seeds and target definition.
pub fn check_comparable(a: &ResultTable, b: &ResultTable) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::invalid(format!("tables `{}` and `{}` cover different (ε, δΩ) grids", a.name, b.name)));
    }
    if a.seeds() != b.seeds() {
        return Err(Error::invalid(format!("tables `{}` and `{}` use different realization seeds", a.name, b.name)));
    }
    for key in ["target", "t_fw_s", "pulses", "rabi_rad_s"] {
        if a.meta.get(key) != b.meta.get(key) {
            return Err(Error::invalid(format!("tables `{}` and `{}` differ in `{key}`", a.name, b.name)));
        }
    }
    Ok(())
}

/// Region counts of every table and their improvement over `baseline`.
pub fn region_metrics(tables: &[ResultTable], baseline: &ResultTable, threshold: f64) -> Result<Vec<RegionMetric>> {
    let base = region_count(baseline, threshold);
    tables
        .iter()
        .map(|t| {
            check_comparable(t, baseline)?;
            let count = region_count(t, threshold);
            Ok(RegionMetric {
                policy: t.name.clone(),
                grid_points: t.grid().len(),
                region_count: count,
                improvement_pct: (base > 0).then(|| 100.0 * (count as f64 - base as f64) / base as f64),
            })
        })
        .collect()
}

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::CeReport;
use crate::error::Result;
use crate::koopman::koopman_eigenvalues;
use crate::netarch::Hkd;
use crate::trainer::MetricsRow;

use super::binary::write_atomic;

pub const METRICS_HEADER: &str = "iter,epoch,lambda1,loss_total,loss_mse,loss_feat,grad_norm_theta,grad_norm_phi,grad_norm_a";
pub const SPECTRA_HEADER: &str = "level,i,j,block,alpha,beta,magnitude,phase";
pub const CE_HEADER: &str = "level,band,lo,hi,time,norm,share";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.iter, r.epoch, r.lambda1, r.loss_total, r.loss_mse, r.loss_feat, r.grad_norm_theta, r.grad_norm_phi, r.grad_norm_a
        );
    }
    s
}

/// Eigenvalues of `exp(A_l dt)` at `dt = T - epsilon` for every level, block and location.
pub fn spectra_csv(model: &Hkd<f32>) -> Result<String> {
    let dt = model.config.span();
    let mut s = format!("{SPECTRA_HEADER}\n");
    for op in model.koopman_ops() {
        for m in koopman_eigenvalues(&op, dt)? {
            let _ = writeln!(s, "{},{},{},{},{:e},{:e},{:e},{:e}", m.level, m.i, m.j, m.block, m.alpha, m.beta, m.magnitude, m.phase);
        }
    }
    Ok(s)
}

pub fn ce_csv(report: &CeReport) -> String {
    let mut s = format!("{CE_HEADER}\n");
    for e in &report.entries {
        let _ = writeln!(s, "{},{},{},{},{:e},{:e},{:e}", e.level, e.band, e.lo, e.hi, e.time, e.norm, e.share);
    }
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_atomic(path.as_ref(), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::CeEntry;

    #[test]
    fn ce_rows() {
        let r = CeReport {
            entries: vec![CeEntry { level: 1, band: 0, lo: 0, hi: 2, time: 3.0, norm: 0.5, share: 1.0 }],
        };
        assert_eq!(ce_csv(&r), format!("{CE_HEADER}\n1,0,0,2,3e0,5e-1,1e0\n"));
    }

    #[test]
    fn spectra_row_count() {
        let cfg = crate::netarch::ModelConfig { image_size: 8, levels: 2, latent_channels: vec![4, 6], hidden_widths: vec![4, 4], ..Default::default() };
        let m = Hkd::<f32>::new(cfg).unwrap();
        let text = spectra_csv(&m).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 64 + 3 * 16);
        assert!(text.lines().nth(1).unwrap().starts_with("1,0,0,0,0e0,0e0,1e0,0e0"));
    }
}

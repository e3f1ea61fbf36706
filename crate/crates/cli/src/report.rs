//! Per-SNR hit-rate tables.

use serde::Serialize;

use crate::config::SnrDb;

/// Binomial standard error of an estimated rate over `trials` draws.
pub fn binomial_stderr(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

/// One row of the sweep: rates are per planted target, aggregated over
/// every trial at that SNR.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub snr_db: SnrDb,
    pub hit_rate: f64,
    pub fa_rate: f64,
    pub trials: usize,
    pub stderr: f64,
}

/// The sweep result, in config order.
#[derive(Debug, Clone, Serialize)]
pub struct HitRateReport {
    pub rows: Vec<ReportRow>,
}

impl HitRateReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,hit_rate,fa_rate,trials,stderr\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.snr_db.label(),
                row.hit_rate,
                row.fa_rate,
                row.trials,
                row.stderr
            ));
        }
        out
    }

    /// Row lookup by sweep position.
    pub fn row(&self, index: usize) -> &ReportRow {
        &self.rows[index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_matches_the_documented_header_and_layout() {
        let report = HitRateReport {
            rows: vec![
                ReportRow {
                    snr_db: SnrDb(-10.0),
                    hit_rate: 0.5,
                    fa_rate: 0.25,
                    trials: 16,
                    stderr: binomial_stderr(0.5, 16),
                },
                ReportRow {
                    snr_db: SnrDb(f64::INFINITY),
                    hit_rate: 1.0,
                    fa_rate: 0.0,
                    trials: 16,
                    stderr: 0.0,
                },
            ],
        };
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "snr_db,hit_rate,fa_rate,trials,stderr");
        assert_eq!(lines.next().unwrap(), "-10,0.5,0.25,16,0.125");
        assert_eq!(lines.next().unwrap(), "inf,1,0,16,0");
        assert!(lines.next().is_none());
    }

    #[test]
    fn stderr_follows_the_binomial_formula() {
        assert_eq!(binomial_stderr(0.0, 100), 0.0);
        assert_eq!(binomial_stderr(1.0, 100), 0.0);
        let got = binomial_stderr(0.3, 200);
        assert!((got - (0.3_f64 * 0.7 / 200.0).sqrt()).abs() < 1e-15);
    }
}

//! Portable on-disk formats: coefficient sets, detection tables, and
//! delay-Doppler maps.
//!
//! Everything here is text.  Coefficient sets serialize as a one-line JSON
//! header followed by CSV rows of interleaved real/imaginary parts; floats
//! use Rust's default `Display`, whose shortest-round-trip output restores
//! the exact bits on parse.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array3;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classic::DelayDopplerMap;
use crate::focusing::RecoveryResult;
use crate::mimo::azimuth_sine_of_bin;
use crate::model::RadarParams;
use crate::synth::{BandSelection, PulseSchedule, XampleSet};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct XampleHeader {
    channels: usize,
    frames: usize,
    k: usize,
    kappa: BandSelection,
    schedule: PulseSchedule,
    params: RadarParams,
}

/// Renders a coefficient set as a JSON header line plus one CSV row per
/// (channel, frame), each holding `2 K` interleaved real/imag values.
pub fn xample_to_portable(x: &XampleSet) -> Result<String> {
    x.validate()?;
    let header = XampleHeader {
        channels: x.channels(),
        frames: x.frames(),
        k: x.k(),
        kappa: x.kappa.clone(),
        schedule: x.schedule.clone(),
        params: x.params.clone(),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for ch in 0..x.channels() {
        for f in 0..x.frames() {
            for i in 0..x.k() {
                let c = x.coeffs[(ch, f, i)];
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{},{}", c.re, c.im);
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// Parses the output of [`xample_to_portable`].
pub fn xample_from_portable(text: &str) -> Result<XampleSet> {
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Parse("empty document".into()))?;
    let header: XampleHeader = serde_json::from_str(header_line)?;
    let mut coeffs = Array3::zeros((header.channels, header.frames, header.k));
    let mut rows = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        if rows >= header.channels * header.frames {
            return Err(Error::Parse(format!(
                "more data rows than the {} x {} declared in the header",
                header.channels, header.frames
            )));
        }
        let (ch, f) = (rows / header.frames, rows % header.frames);
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 2 * header.k {
            return Err(Error::Parse(format!(
                "row {rows} has {} values, expected {}",
                cells.len(),
                2 * header.k
            )));
        }
        for i in 0..header.k {
            let re: f64 = cells[2 * i]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {rows}: {e}")))?;
            let im: f64 = cells[2 * i + 1]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {rows}: {e}")))?;
            coeffs[(ch, f, i)] = Complex64::new(re, im);
        }
        rows += 1;
    }
    if rows != header.channels * header.frames {
        return Err(Error::Parse(format!(
            "{rows} data rows for {} channels of {} frames",
            header.channels, header.frames
        )));
    }
    let set = XampleSet {
        coeffs,
        kappa: header.kappa,
        schedule: header.schedule,
        params: header.params,
    };
    set.validate()?;
    Ok(set)
}

pub fn write_xample_file(path: impl AsRef<Path>, x: &XampleSet) -> Result<()> {
    fs::write(path, xample_to_portable(x)?)?;
    Ok(())
}

pub fn read_xample_file(path: impl AsRef<Path>) -> Result<XampleSet> {
    xample_from_portable(&fs::read_to_string(path)?)
}

/// Detection table as CSV, one row per detection in the stored order.
///
/// Columns are `delay_bin, doppler_bin, q, re_amp, im_amp, magnitude`,
/// with `q` the ambiguity order (0 when the mode has none).  Passing the
/// azimuth grid size inserts `azimuth_bin, azimuth_sine` columns after
/// `q`; detections without a bearing leave them empty.
pub fn detections_to_csv(result: &RecoveryResult, azimuth_bins: Option<usize>) -> String {
    let mut out = String::new();
    match azimuth_bins {
        Some(_) => {
            out.push_str("delay_bin,doppler_bin,q,azimuth_bin,azimuth_sine,re_amp,im_amp,magnitude\n")
        }
        None => out.push_str("delay_bin,doppler_bin,q,re_amp,im_amp,magnitude\n"),
    }
    for d in &result.detections {
        let q = d.ambiguity_order.unwrap_or(0);
        let _ = write!(out, "{},{},{q}", d.delay_bin, d.doppler_bin);
        if let Some(bins) = azimuth_bins {
            match d.azimuth_bin {
                Some(u) => {
                    let _ = write!(out, ",{u},{}", azimuth_sine_of_bin(u, bins));
                }
                None => out.push_str(",,"),
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            d.amplitude.re,
            d.amplitude.im,
            d.magnitude()
        );
    }
    out
}

/// Delay-Doppler map magnitudes as a CSV matrix: the header row carries
/// the Doppler bin centers in rad/s, the first column the delay bin
/// centers in seconds.
pub fn map_to_csv(map: &DelayDopplerMap) -> String {
    let mut out = String::from("delay_s");
    for q in 0..map.doppler_bins() {
        let _ = write!(out, ",{}", q as f64 * map.doppler_step_rad_s);
    }
    out.push('\n');
    for s in 0..map.delay_bins() {
        let _ = write!(out, "{}", s as f64 * map.delay_step_s);
        for q in 0..map.doppler_bins() {
            let _ = write!(out, ",{}", map.magnitudes[(q, s)]);
        }
        out.push('\n');
    }
    out
}

/// Writes any serializable value as pretty-printed JSON.
pub fn write_json_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a JSON document written by [`write_json_file`] or by hand.
pub fn read_json_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::focusing::Detection;
    use crate::model::{Target, TargetScene};
    use crate::synth::{fourier_coeffs, ArrayGeometry};
    use crate::waveforms::PulseSpectrum;

    fn sample_set() -> XampleSet {
        let params = RadarParams::new(1.0, 16.0, 1.0e10, 6).unwrap();
        let scene = TargetScene::new(vec![
            Target::new(0.21, 2.3, Complex64::new(0.123456789, -0.7)),
            Target::new(0.68, -1.1, Complex64::new(-0.25, 1.0 / 3.0)),
        ])
        .unwrap();
        fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(16),
            &PulseSchedule::non_uniform(vec![0, 2, 5]).unwrap(),
            &BandSelection::random(5, 16, 77),
        )
        .unwrap()
    }

    #[test]
    fn portable_form_restores_every_bit() {
        let x = sample_set();
        let text = xample_to_portable(&x).unwrap();
        let back = xample_from_portable(&text).unwrap();
        assert_eq!(back.coeffs, x.coeffs);
        assert_eq!(back.kappa, x.kappa);
        assert_eq!(back.schedule, x.schedule);
        assert_eq!(back.params, x.params);
    }

    #[test]
    fn portable_form_survives_a_phase_coded_schedule() {
        let params = RadarParams::new(1.0, 8.0, 1.0e10, 4).unwrap();
        let scene = TargetScene::new(vec![Target::new(1.3, 0.9, Complex64::new(1.0, 0.0))]).unwrap();
        let schedule = PulseSchedule::phase_coded(4, 2, 31).unwrap();
        let x = fourier_coeffs(
            &scene,
            &params,
            &PulseSpectrum::flat(8),
            &schedule,
            &BandSelection::full(8),
        )
        .unwrap();
        let back = xample_from_portable(&xample_to_portable(&x).unwrap()).unwrap();
        assert_eq!(back.schedule, schedule);
        assert_eq!(back.coeffs, x.coeffs);
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let x = sample_set();
        let text = xample_to_portable(&x).unwrap();
        assert!(matches!(xample_from_portable(""), Err(Error::Parse(_))));
        assert!(matches!(
            xample_from_portable("{\"not\":\"a header\"}\n1,2\n"),
            Err(Error::Parse(_))
        ));
        let truncated: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(matches!(xample_from_portable(&truncated), Err(Error::Parse(_))));
        let short_row = text.replacen("\n", "\n1.0,", 1).replacen(",1.0,", ",", 1);
        assert!(xample_from_portable(&short_row).is_err());
        let garbled = text.replacen("0.", "0x", 1);
        assert!(xample_from_portable(&garbled).is_err());
    }

    #[test]
    fn xample_files_round_trip_on_disk() {
        let x = sample_set();
        let path = std::env::temp_dir().join(format!("xample-io-{}.txt", std::process::id()));
        write_xample_file(&path, &x).unwrap();
        let back = read_xample_file(&path).unwrap();
        let _ = fs::remove_file(&path);
        assert_eq!(back.coeffs, x.coeffs);
    }

    #[test]
    fn detection_tables_print_the_documented_columns() {
        let result = RecoveryResult {
            detections: vec![
                Detection {
                    delay_bin: 4,
                    doppler_bin: 7,
                    azimuth_bin: None,
                    ambiguity_order: Some(2),
                    amplitude: Complex64::new(1.5, -0.5),
                },
                Detection {
                    delay_bin: 9,
                    doppler_bin: 0,
                    azimuth_bin: None,
                    ambiguity_order: None,
                    amplitude: Complex64::new(0.0, 2.0),
                },
            ],
            residual_energy: 0.0,
        };
        let csv = detections_to_csv(&result, None);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "delay_bin,doppler_bin,q,re_amp,im_amp,magnitude");
        assert_eq!(lines[1], format!("4,7,2,1.5,-0.5,{}", (2.5f64).sqrt()));
        assert_eq!(lines[2], "9,0,0,0,2,2");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn azimuth_columns_appear_with_a_grid() {
        let result = RecoveryResult {
            detections: vec![Detection {
                delay_bin: 1,
                doppler_bin: 2,
                azimuth_bin: Some(20),
                ambiguity_order: None,
                amplitude: Complex64::new(1.0, 0.0),
            }],
            residual_energy: 0.0,
        };
        let csv = detections_to_csv(&result, Some(80));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "delay_bin,doppler_bin,q,azimuth_bin,azimuth_sine,re_amp,im_amp,magnitude"
        );
        assert_eq!(lines[1], "1,2,0,20,0.5,1,0,1");
    }

    #[test]
    fn map_export_labels_both_axes() {
        let values = ndarray::Array2::from_shape_fn((2, 3), |(q, s)| {
            Complex64::new((q * 3 + s) as f64, 0.0)
        });
        let map = DelayDopplerMap {
            magnitudes: values.mapv(|c| c.norm()),
            values,
            delay_step_s: 0.25,
            doppler_step_rad_s: 0.5,
            amp_divisor: 1.0,
        };
        let csv = map_to_csv(&map);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "delay_s,0,0.5");
        assert_eq!(lines[1], "0,0,3");
        assert_eq!(lines[2], "0.25,1,4");
        assert_eq!(lines[3], "0.5,2,5");
    }

    #[test]
    fn json_helpers_round_trip_an_array_geometry() {
        let array = ArrayGeometry {
            tx_positions: vec![0.0, 1.5],
            rx_positions: vec![0.0, 0.5, 1.0],
            virtual_tx: 2,
            virtual_rx: 3,
            tx_carrier_offsets_hz: vec![0.0, 2.0e6],
        };
        let path = std::env::temp_dir().join(format!("array-io-{}.json", std::process::id()));
        write_json_file(&path, &array).unwrap();
        let back: ArrayGeometry = read_json_file(&path).unwrap();
        let _ = fs::remove_file(&path);
        assert_eq!(back, array);
        let missing: Result<ArrayGeometry> =
            read_json_file(std::env::temp_dir().join("array-io-not-there.json"));
        assert!(matches!(missing, Err(Error::Io(_))));
    }
}

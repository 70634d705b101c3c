//! Tab-separated metric reports, occlusion tables and training traces.
//!
//! Floats use Rust's shortest round-trip formatting so reports parse back exactly.

use super::atomic::{read_text, write_atomic};
use crate::error::{Error, Result};
use crate::fusion::{EpochRecord, Stage};
use crate::losses::{Aggregate, MetricsReport, OcclusionBin, SampleMetrics};
use std::fmt::Write as _;
use std::path::Path;

const AGGREGATE_ROW: &str = "#aggregate";

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn columns(report: &MetricsReport) -> Vec<String> {
    let mut c = vec!["id".to_string(), "occlusion".into(), "cd_object_mm2".into()];
    c.extend(report.object_thresholds_mm.iter().map(|t| format!("fs_object@{t}mm")));
    c.push("cd_hand_mm2".into());
    c.extend(report.hand_thresholds_mm.iter().map(|t| format!("fs_hand@{t}mm")));
    c
}

pub fn encode_report(report: &MetricsReport) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "#centered\t{}", report.centered).expect("string write");
    writeln!(s, "#object_thresholds_mm\t{}", join(&report.object_thresholds_mm)).expect("string write");
    writeln!(s, "#hand_thresholds_mm\t{}", join(&report.hand_thresholds_mm)).expect("string write");
    s.push_str(&columns(report).join("\t"));
    s.push('\n');
    let (no, nh) = (report.object_thresholds_mm.len(), report.hand_thresholds_mm.len());
    for m in &report.samples {
        if m.id.is_empty() || m.id.starts_with('#') || m.id.contains(['\t', '\n']) {
            return Err(Error::precondition(format!("sample id {:?} cannot be written to a report", m.id)));
        }
        if m.fs_object.len() != no || m.fs_hand.len() != nh {
            return Err(Error::shape(format!("f-scores of '{}'", m.id), no + nh, m.fs_object.len() + m.fs_hand.len()));
        }
        let mut row = vec![m.id.clone(), m.occlusion.to_string(), m.cd_object.to_string()];
        row.extend(m.fs_object.iter().map(|v| v.to_string()));
        row.push(m.cd_hand.to_string());
        row.extend(m.fs_hand.iter().map(|v| v.to_string()));
        s.push_str(&row.join("\t"));
        s.push('\n');
    }
    let a = &report.aggregate;
    let mut row = vec![AGGREGATE_ROW.to_string(), String::new(), a.median_cd_object.to_string()];
    row.extend(a.mean_fs_object.iter().map(|v| v.to_string()));
    row.push(a.median_cd_hand.to_string());
    row.extend(a.mean_fs_hand.iter().map(|v| v.to_string()));
    s.push_str(&row.join("\t"));
    s.push('\n');
    Ok(s)
}

fn parse_f64(tok: &str, line: usize, path: &Path) -> Result<f64> {
    tok.parse()
        .map_err(|_| Error::format(path, format!("line {line}: bad number '{tok}'")))
}

fn meta<'a>(line: Option<(usize, &'a str)>, key: &str, path: &Path) -> Result<(usize, &'a str)> {
    let (n, l) = line.ok_or_else(|| Error::format(path, format!("missing '{key}' line")))?;
    match l.split_once('\t') {
        Some((k, v)) if k == key => Ok((n + 1, v)),
        _ => Err(Error::format(path, format!("line {}: expected '{key}'", n + 1))),
    }
}

fn parse_list(v: &str, line: usize, path: &Path) -> Result<Vec<f64>> {
    v.split_whitespace().map(|t| parse_f64(t, line, path)).collect()
}

pub fn decode_report(text: &str, path: &Path) -> Result<MetricsReport> {
    let mut lines = text.lines().enumerate();
    let (n, v) = meta(lines.next(), "#centered", path)?;
    let centered = match v {
        "true" => true,
        "false" => false,
        _ => return Err(Error::format(path, format!("line {n}: bad boolean '{v}'"))),
    };
    let (n, v) = meta(lines.next(), "#object_thresholds_mm", path)?;
    let object_thresholds_mm = parse_list(v, n, path)?;
    let (n, v) = meta(lines.next(), "#hand_thresholds_mm", path)?;
    let hand_thresholds_mm = parse_list(v, n, path)?;
    let mut report = MetricsReport {
        object_thresholds_mm,
        hand_thresholds_mm,
        centered,
        samples: Vec::new(),
        aggregate: Aggregate {
            median_cd_object: f64::NAN,
            median_cd_hand: f64::NAN,
            mean_fs_object: Vec::new(),
            mean_fs_hand: Vec::new(),
        },
    };
    let header = columns(&report).join("\t");
    match lines.next() {
        Some((_, l)) if l == header => {}
        Some((n, _)) => return Err(Error::format(path, format!("line {}: unexpected column header", n + 1))),
        None => return Err(Error::format(path, "missing column header")),
    }
    let (no, nh) = (report.object_thresholds_mm.len(), report.hand_thresholds_mm.len());
    let width = 4 + no + nh;
    let mut saw_aggregate = false;
    for (n, l) in lines {
        let line = n + 1;
        if saw_aggregate {
            return Err(Error::format(path, format!("line {line}: content after aggregate row")));
        }
        let toks: Vec<&str> = l.split('\t').collect();
        if toks.len() != width {
            return Err(Error::format(path, format!("line {line}: expected {width} fields, found {}", toks.len())));
        }
        let nums = |r: std::ops::Range<usize>| -> Result<Vec<f64>> { toks[r].iter().map(|t| parse_f64(t, line, path)).collect() };
        let fs_object = nums(3..3 + no)?;
        let cd_hand = parse_f64(toks[3 + no], line, path)?;
        let fs_hand = nums(4 + no..width)?;
        let cd_object = parse_f64(toks[2], line, path)?;
        if toks[0] == AGGREGATE_ROW {
            report.aggregate = Aggregate {
                median_cd_object: cd_object,
                median_cd_hand: cd_hand,
                mean_fs_object: fs_object,
                mean_fs_hand: fs_hand,
            };
            saw_aggregate = true;
        } else {
            report.samples.push(SampleMetrics {
                id: toks[0].to_string(),
                cd_object,
                fs_object,
                cd_hand,
                fs_hand,
                occlusion: parse_f64(toks[1], line, path)?,
            });
        }
    }
    if !saw_aggregate {
        return Err(Error::format(path, "missing aggregate row"));
    }
    Ok(report)
}

pub fn write_report(report: &MetricsReport, path: &Path) -> Result<()> {
    write_atomic(path, encode_report(report)?.as_bytes())
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    decode_report(&read_text(path)?, path)
}

pub fn encode_occlusion_table(bins: &[OcclusionBin]) -> String {
    let mut s = String::from("decile\tmin_rate\tmax_rate\tcount\tmedian_cd_object_mm2\n");
    for (i, b) in bins.iter().enumerate() {
        writeln!(s, "{}\t{}\t{}\t{}\t{}", i + 1, b.min_rate, b.max_rate, b.count, b.median_cd).expect("string write");
    }
    s
}

pub fn decode_occlusion_table(text: &str, path: &Path) -> Result<Vec<OcclusionBin>> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some("decile\tmin_rate\tmax_rate\tcount\tmedian_cd_object_mm2") {
        return Err(Error::format(path, "line 1: unexpected column header"));
    }
    lines
        .map(|(n, l)| {
            let toks: Vec<&str> = l.split('\t').collect();
            if toks.len() != 5 {
                return Err(Error::format(path, format!("line {}: expected 5 fields", n + 1)));
            }
            Ok(OcclusionBin {
                min_rate: parse_f64(toks[1], n + 1, path)?,
                max_rate: parse_f64(toks[2], n + 1, path)?,
                count: toks[3]
                    .parse()
                    .map_err(|_| Error::format(path, format!("line {}: bad count '{}'", n + 1, toks[3])))?,
                median_cd: parse_f64(toks[4], n + 1, path)?,
            })
        })
        .collect()
}

pub fn encode_trace(trace: &[EpochRecord]) -> String {
    let mut s = String::from("epoch\tstage\trec\tweight\tproj\tmask\tph\tpo\ttotal\n");
    for r in trace {
        let stage = match r.stage {
            Stage::Main => "main",
            Stage::FineTune => "finetune",
        };
        let p = r.breakdown.parts;
        writeln!(
            s,
            "{}\t{stage}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.epoch, p.rec, p.weight, p.proj, p.mask, p.ph, p.po, r.breakdown.total
        )
        .expect("string write");
    }
    s
}

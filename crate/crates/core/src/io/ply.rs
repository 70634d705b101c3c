//! Vertex-only PLY clouds with float x, y, z and an optional int label.

use super::atomic::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::geom::Cloud;
use nalgebra::Point3;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

pub fn encode_cloud(cloud: &Cloud<f64>, format: PlyFormat) -> Vec<u8> {
    let labels = cloud.labels();
    let mut out = String::from("ply\n");
    out.push_str(match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if labels.is_some() {
        out.push_str("property int label\n");
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    for (i, p) in cloud.points().iter().enumerate() {
        let xyz = [p.x as f32, p.y as f32, p.z as f32];
        match format {
            PlyFormat::Ascii => {
                let mut line = format!("{} {} {}", xyz[0], xyz[1], xyz[2]);
                if let Some(l) = labels {
                    line.push_str(&format!(" {}", l[i]));
                }
                line.push('\n');
                bytes.extend_from_slice(line.as_bytes());
            }
            PlyFormat::BinaryLittleEndian => {
                for v in xyz {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(l) = labels {
                    bytes.extend_from_slice(&l[i].to_le_bytes());
                }
            }
        }
    }
    bytes
}

pub fn write_cloud(cloud: &Cloud<f64>, path: &Path, format: PlyFormat) -> Result<()> {
    write_atomic(path, &encode_cloud(cloud, format))
}

pub fn read_cloud(path: &Path) -> Result<Cloud<f64>> {
    decode_cloud(&read_bytes(path)?, path)
}

struct Header {
    format: PlyFormat,
    count: usize,
    labelled: bool,
    body: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let bad = |d: String| Error::format(path, d);
    let end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or_else(|| bad("missing end_header".into()))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err(bad("missing 'ply' magic".into()));
    }
    let mut format = None;
    let mut count = None;
    let mut props = Vec::new();
    for (n, line) in lines {
        let line_no = n + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", f, "1.0"] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(bad(format!("line {line_no}: unsupported format '{other}'"))),
                })
            }
            ["element", "vertex", n] => {
                if count.is_some() {
                    return Err(bad(format!("line {line_no}: duplicate vertex element")));
                }
                count = Some(n.parse::<usize>().map_err(|_| bad(format!("line {line_no}: bad vertex count '{n}'")))?);
            }
            ["element", name, ..] => {
                return Err(bad(format!("line {line_no}: only vertex elements are supported, found '{name}'")));
            }
            ["property", ty, name] => {
                if count.is_none() {
                    return Err(bad(format!("line {line_no}: property before element")));
                }
                props.push((ty.to_string(), name.to_string(), line_no));
            }
            _ => return Err(bad(format!("line {line_no}: unrecognised header line '{line}'"))),
        }
    }
    let format = format.ok_or_else(|| bad("missing format line".into()))?;
    let count = count.ok_or_else(|| bad("missing vertex element".into()))?;
    let is_float = |t: &str| t == "float" || t == "float32";
    let is_int = |t: &str| t == "int" || t == "int32";
    let labelled = match props.as_slice() {
        [(a, x, _), (b, y, _), (c, z, _)] if x == "x" && y == "y" && z == "z" && is_float(a) && is_float(b) && is_float(c) => false,
        [(a, x, _), (b, y, _), (c, z, _), (d, l, _)]
            if x == "x" && y == "y" && z == "z" && l == "label" && is_float(a) && is_float(b) && is_float(c) && is_int(d) =>
        {
            true
        }
        _ => {
            let found: Vec<String> = props.iter().map(|(t, n, _)| format!("{t} {n}")).collect();
            return Err(bad(format!(
                "vertex properties must be float x, y, z (+ optional int label), found [{}]",
                found.join(", ")
            )));
        }
    };
    Ok(Header {
        format,
        count,
        labelled,
        body: end + 11,
    })
}

pub fn decode_cloud(bytes: &[u8], path: &Path) -> Result<Cloud<f64>> {
    let h = parse_header(bytes, path)?;
    let body = &bytes[h.body..];
    let mut pts = Vec::with_capacity(h.count);
    let mut labels = Vec::new();
    match h.format {
        PlyFormat::BinaryLittleEndian => {
            let stride = if h.labelled { 16 } else { 12 };
            let expected = h.count * stride;
            if body.len() != expected {
                return Err(Error::format(
                    path,
                    format!("vertex payload is {} bytes, expected {expected} for {} vertices", body.len(), h.count),
                ));
            }
            for rec in body.chunks_exact(stride) {
                let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().expect("4 bytes")) as f64;
                pts.push(Point3::new(f(0), f(4), f(8)));
                if h.labelled {
                    labels.push(i32::from_le_bytes(rec[12..16].try_into().expect("4 bytes")));
                }
            }
        }
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| Error::format(path, "ascii body is not UTF-8"))?;
            let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
            if rows.len() != h.count {
                return Err(Error::format(path, format!("header declares {} vertices, found {}", h.count, rows.len())));
            }
            let width = if h.labelled { 4 } else { 3 };
            for (i, row) in rows.iter().enumerate() {
                let toks: Vec<&str> = row.split_whitespace().collect();
                if toks.len() != width {
                    return Err(Error::format(path, format!("vertex {i}: expected {width} values, found {}", toks.len())));
                }
                let f = |t: &str| {
                    t.parse::<f32>()
                        .map(f64::from)
                        .map_err(|_| Error::format(path, format!("vertex {i}: bad float '{t}'")))
                };
                pts.push(Point3::new(f(toks[0])?, f(toks[1])?, f(toks[2])?));
                if h.labelled {
                    labels.push(
                        toks[3]
                            .parse::<i32>()
                            .map_err(|_| Error::format(path, format!("vertex {i}: bad label '{}'", toks[3])))?,
                    );
                }
            }
        }
    }
    let cloud = Cloud::new(pts).map_err(|e| Error::format(path, e.to_string()))?;
    if h.labelled {
        cloud.with_labels(labels)
    } else {
        Ok(cloud)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize) -> Cloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let pts = (0..n)
            .map(|_| Point3::new(rng.random_range(-1.0f32..1.0) as f64, rng.random_range(-1.0f32..1.0) as f64, rng.random_range(0.0f32..2.0) as f64))
            .collect();
        Cloud::new(pts).unwrap()
    }

    #[test]
    fn round_trips_both_formats() {
        let c = random_cloud(1000);
        for f in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            assert_eq!(decode_cloud(&encode_cloud(&c, f), Path::new("m")).unwrap(), c);
        }
        let labelled = c.clone().with_labels((0..1000).map(|i| i % 7 - 3).collect()).unwrap();
        for f in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            assert_eq!(decode_cloud(&encode_cloud(&labelled, f), Path::new("m")).unwrap(), labelled);
        }
    }

    #[test]
    fn empty_cloud_round_trip() {
        let e = Cloud::empty();
        for f in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let bytes = encode_cloud(&e, f);
            assert!(String::from_utf8_lossy(&bytes).contains("element vertex 0"));
            assert!(decode_cloud(&bytes, Path::new("m")).unwrap().is_empty());
        }
    }

    #[test]
    fn count_mismatch_and_foreign_elements() {
        let c = random_cloud(10);
        let mut ascii = String::from_utf8(encode_cloud(&c, PlyFormat::Ascii)).unwrap();
        let last = ascii.trim_end().rfind('\n').unwrap();
        ascii.truncate(last + 1);
        assert!(decode_cloud(ascii.as_bytes(), Path::new("m")).unwrap_err().to_string().contains("found 9"));
        let mut bin = encode_cloud(&c, PlyFormat::BinaryLittleEndian);
        bin.truncate(bin.len() - 12);
        assert!(decode_cloud(&bin, Path::new("m")).is_err());
        let face = b"ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n";
        assert!(decode_cloud(face, Path::new("m")).unwrap_err().to_string().contains("face"));
        assert!(decode_cloud(b"garbage", Path::new("m")).is_err());
        assert!(decode_cloud(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nend_header\n1\n", Path::new("m")).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.ply");
        let c = random_cloud(50);
        write_cloud(&c, &p, PlyFormat::BinaryLittleEndian).unwrap();
        assert_eq!(read_cloud(&p).unwrap(), c);
        assert!(matches!(read_cloud(&dir.path().join("none.ply")), Err(Error::Io { .. })));
    }
}

//! Shared checkpoint container for both model families: a text header line
//! followed by the parameter tables either as base-10 text rows or as raw
//! little-endian f64 blocks.

use std::io::Write;
use std::path::Path;

use crate::boxgeom::GumbelParams;
use crate::boxmodel::{BoxModel, BoxTable};
use crate::error::{Error, Result};
use crate::table::EmbeddingTable;
use crate::training::Model;
use crate::vecmodel::{Transform, VectorModel};

/// Payload encoding, selected per save.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointFormat {
    Text,
    Binary,
}

impl CheckpointFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckpointFormat::Text => "text",
            CheckpointFormat::Binary => "binary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(CheckpointFormat::Text),
            "binary" => Ok(CheckpointFormat::Binary),
            other => Err(Error::Checkpoint(format!("unknown format `{other}`"))),
        }
    }
}

fn write_table_text<W: Write>(w: &mut W, table: &EmbeddingTable) -> Result<()> {
    for r in 0..table.rows() {
        let row = table.row(r);
        let mut line = String::new();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn write_table_binary<W: Write>(w: &mut W, table: &EmbeddingTable) -> Result<()> {
    for v in table.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Saves a model with the hash of the catalog it was trained against.
pub fn save<W: Write>(
    w: &mut W,
    model: &Model,
    catalog_hash: &str,
    format: CheckpointFormat,
) -> Result<()> {
    let tables: Vec<&EmbeddingTable> = match model {
        Model::Vector(vm) => {
            writeln!(
                w,
                "#checkpoint\tkind=vector\tformat={}\td={}\tm={}\tn={}\ttransform={}\tcatalog={}",
                format.as_str(),
                vm.dim(),
                vm.num_items(),
                vm.num_attributes(),
                vm.transform.as_str(),
                catalog_hash
            )?;
            vec![&vm.item_vecs, &vm.attr_vecs]
        }
        Model::Box(bm) => {
            writeln!(
                w,
                "#checkpoint\tkind=box\tformat={}\td={}\tm={}\tn={}\tbeta={}\ttau={}\tcatalog={}",
                format.as_str(),
                bm.dim(),
                bm.num_items(),
                bm.num_attributes(),
                bm.temps.beta,
                bm.temps.tau,
                catalog_hash
            )?;
            vec![
                &bm.item_boxes.mins,
                &bm.item_boxes.maxs,
                &bm.attr_boxes.mins,
                &bm.attr_boxes.maxs,
            ]
        }
    };
    for table in tables {
        match format {
            CheckpointFormat::Text => write_table_text(w, table)?,
            CheckpointFormat::Binary => write_table_binary(w, table)?,
        }
    }
    Ok(())
}

pub fn save_to_path(
    path: &Path,
    model: &Model,
    catalog_hash: &str,
    format: CheckpointFormat,
) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    save(&mut file, model, catalog_hash, format)?;
    file.flush()?;
    Ok(())
}

struct Header {
    kind: String,
    format: CheckpointFormat,
    d: usize,
    m: usize,
    n: usize,
    transform: Option<Transform>,
    beta: Option<f64>,
    tau: Option<f64>,
    catalog: String,
}

fn parse_header(line: &str) -> Result<Header> {
    let rest = line
        .strip_prefix("#checkpoint\t")
        .ok_or_else(|| Error::Checkpoint("missing #checkpoint header".into()))?;
    let mut kind = None;
    let mut format = None;
    let mut d = None;
    let mut m = None;
    let mut n = None;
    let mut transform = None;
    let mut beta = None;
    let mut tau = None;
    let mut catalog = None;
    for field in rest.split('\t') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad header field `{field}`")))?;
        match key {
            "kind" => kind = Some(value.to_string()),
            "format" => format = Some(CheckpointFormat::parse(value)?),
            "d" => d = value.parse().ok(),
            "m" => m = value.parse().ok(),
            "n" => n = value.parse().ok(),
            "transform" => transform = Some(Transform::parse(value)?),
            "beta" => beta = value.parse().ok(),
            "tau" => tau = value.parse().ok(),
            "catalog" => catalog = Some(value.to_string()),
            other => return Err(Error::Checkpoint(format!("unknown header key `{other}`"))),
        }
    }
    match (kind, format, d, m, n, catalog) {
        (Some(kind), Some(format), Some(d), Some(m), Some(n), Some(catalog)) => Ok(Header {
            kind,
            format,
            d,
            m,
            n,
            transform,
            beta,
            tau,
            catalog,
        }),
        _ => Err(Error::Checkpoint("incomplete header".into())),
    }
}

fn read_tables_text(payload: &[u8], shapes: &[(usize, usize)]) -> Result<Vec<EmbeddingTable>> {
    let text = std::str::from_utf8(payload)
        .map_err(|_| Error::Checkpoint("text payload is not UTF-8".into()))?;
    let mut lines = text.lines();
    let mut out = Vec::with_capacity(shapes.len());
    for &(rows, dim) in shapes {
        let mut data = Vec::with_capacity(rows * dim);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Checkpoint("truncated text payload".into()))?;
            let mut count = 0;
            for tok in line.split_ascii_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Checkpoint(format!("bad float `{tok}`")))?;
                data.push(v);
                count += 1;
            }
            if count != dim {
                return Err(Error::Checkpoint(format!(
                    "row {r} has {count} values, expected {dim}"
                )));
            }
        }
        out.push(EmbeddingTable::from_rows(rows, dim, data));
    }
    if lines.next().is_some() {
        return Err(Error::Checkpoint("trailing data after payload".into()));
    }
    Ok(out)
}

fn read_tables_binary(payload: &[u8], shapes: &[(usize, usize)]) -> Result<Vec<EmbeddingTable>> {
    let expected: usize = shapes.iter().map(|&(r, d)| r * d * 8).sum();
    if payload.len() != expected {
        return Err(Error::Checkpoint(format!(
            "binary payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let mut offset = 0;
    let mut out = Vec::with_capacity(shapes.len());
    for &(rows, dim) in shapes {
        let mut data = Vec::with_capacity(rows * dim);
        for _ in 0..rows * dim {
            let bytes: [u8; 8] = payload[offset..offset + 8].try_into().unwrap();
            data.push(f64::from_le_bytes(bytes));
            offset += 8;
        }
        out.push(EmbeddingTable::from_rows(rows, dim, data));
    }
    Ok(out)
}

fn require_finite(tables: &[EmbeddingTable]) -> Result<()> {
    if tables.iter().any(|t| !t.is_finite()) {
        return Err(Error::Checkpoint(
            "parameter tables contain non-finite values".into(),
        ));
    }
    Ok(())
}

/// Loads a checkpoint, returning the model and the catalog hash it carries.
pub fn load(bytes: &[u8]) -> Result<(Model, String)> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header_line = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
    let header = parse_header(header_line)?;
    let payload = &bytes[newline + 1..];
    let model = match header.kind.as_str() {
        "vector" => {
            let transform = header
                .transform
                .ok_or_else(|| Error::Checkpoint("vector checkpoint lacks transform".into()))?;
            let shapes = [(header.m, header.d), (header.n, header.d)];
            let mut tables = match header.format {
                CheckpointFormat::Text => read_tables_text(payload, &shapes)?,
                CheckpointFormat::Binary => read_tables_binary(payload, &shapes)?,
            };
            require_finite(&tables)?;
            let attr_vecs = tables.pop().unwrap();
            let item_vecs = tables.pop().unwrap();
            Model::Vector(VectorModel::new(item_vecs, attr_vecs, transform))
        }
        "box" => {
            let beta = header
                .beta
                .ok_or_else(|| Error::Checkpoint("box checkpoint lacks beta".into()))?;
            let tau = header
                .tau
                .ok_or_else(|| Error::Checkpoint("box checkpoint lacks tau".into()))?;
            let shapes = [
                (header.m, header.d),
                (header.m, header.d),
                (header.n, header.d),
                (header.n, header.d),
            ];
            let mut tables = match header.format {
                CheckpointFormat::Text => read_tables_text(payload, &shapes)?,
                CheckpointFormat::Binary => read_tables_binary(payload, &shapes)?,
            };
            require_finite(&tables)?;
            let attr_maxs = tables.pop().unwrap();
            let attr_mins = tables.pop().unwrap();
            let item_maxs = tables.pop().unwrap();
            let item_mins = tables.pop().unwrap();
            Model::Box(BoxModel::new(
                BoxTable {
                    mins: item_mins,
                    maxs: item_maxs,
                },
                BoxTable {
                    mins: attr_mins,
                    maxs: attr_maxs,
                },
                GumbelParams::new(beta, tau)?,
            ))
        }
        other => return Err(Error::Checkpoint(format!("unknown model kind `{other}`"))),
    };
    Ok((model, header.catalog))
}

pub fn load_from_path(path: &Path) -> Result<(Model, String)> {
    let bytes = std::fs::read(path)?;
    load(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_table(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> EmbeddingTable {
        let mut t = EmbeddingTable::zeros(rows, dim);
        for r in 0..rows {
            for v in t.row_mut(r) {
                *v = rng.gen_range(-2.0..2.0);
            }
        }
        t
    }

    fn models() -> Vec<Model> {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let vector = Model::Vector(VectorModel::new(
            random_table(&mut rng, 3, 4),
            random_table(&mut rng, 2, 4),
            Transform::Sigmoid,
        ));
        let boxes = Model::Box(BoxModel::new(
            BoxTable {
                mins: random_table(&mut rng, 3, 2),
                maxs: random_table(&mut rng, 3, 2),
            },
            BoxTable {
                mins: random_table(&mut rng, 2, 2),
                maxs: random_table(&mut rng, 2, 2),
            },
            GumbelParams::new(0.01, 1.0).unwrap(),
        ));
        vec![vector, boxes]
    }

    #[test]
    fn round_trip_both_kinds_and_formats() {
        for model in models() {
            for format in [CheckpointFormat::Text, CheckpointFormat::Binary] {
                let mut buf = Vec::new();
                save(&mut buf, &model, "cafe01", format).unwrap();
                let (loaded, hash) = load(&buf).unwrap();
                assert_eq!(hash, "cafe01");
                match (&model, &loaded) {
                    (Model::Vector(a), Model::Vector(b)) => {
                        assert_eq!(a.item_vecs, b.item_vecs);
                        assert_eq!(a.attr_vecs, b.attr_vecs);
                        assert_eq!(a.transform, b.transform);
                    }
                    (Model::Box(a), Model::Box(b)) => {
                        assert_eq!(a.item_boxes, b.item_boxes);
                        assert_eq!(a.attr_boxes, b.attr_boxes);
                        assert_eq!(a.temps, b.temps);
                    }
                    _ => panic!("kind changed in round trip"),
                }
            }
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut buf = Vec::new();
        save(&mut buf, &models()[0], "x", CheckpointFormat::Binary).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(load(&buf), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn non_finite_parameters_are_rejected() {
        let mut buf = Vec::new();
        save(&mut buf, &models()[0], "x", CheckpointFormat::Text).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let patched = lines[1].replacen(lines[1].split(' ').next().unwrap(), "inf", 1);
        lines[1] = &patched;
        let corrupt = lines.join("\n") + "\n";
        assert!(matches!(
            load(corrupt.as_bytes()),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn saving_is_byte_deterministic() {
        let model = &models()[1];
        for format in [CheckpointFormat::Text, CheckpointFormat::Binary] {
            let mut a = Vec::new();
            save(&mut a, model, "h", format).unwrap();
            let mut b = Vec::new();
            save(&mut b, model, "h", format).unwrap();
            assert_eq!(a, b);
        }
    }
}

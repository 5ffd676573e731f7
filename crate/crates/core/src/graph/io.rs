//! GraphPack directory format.
//!
//! ```text
//! manifest.json   {"n_nodes", "n_features", "n_classes", "feature_file",
//!                  "edge_file", "label_file", "split_file"}
//! edges.txt       "u v" per line
//! features.bin    row-major little-endian f32, n_nodes × n_features
//! labels.txt      one class id per line
//! split.json      {"train": [...], "val": [...], "test": [...]}
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Graph, Split};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n_nodes: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub feature_file: String,
    pub edge_file: String,
    pub label_file: String,
    pub split_file: String,
    /// When true the loader adds the reverse of every listed edge; otherwise
    /// a missing reverse edge is an error.
    #[serde(default)]
    pub symmetrize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("manifest.json", e))
    }

    fn standard(graph: &Graph) -> Self {
        Manifest {
            n_nodes: graph.n_nodes(),
            n_features: graph.n_features(),
            n_classes: graph.n_classes(),
            feature_file: "features.bin".into(),
            edge_file: "edges.txt".into(),
            label_file: "labels.txt".into(),
            split_file: "split.json".into(),
            symmetrize: false,
            class_names: None,
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a GraphPack directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(Graph, Split)> {
    let dir = dir.as_ref();
    let manifest = Manifest::parse(&read_to_string(&dir.join("manifest.json"))?)?;
    load_with_manifest(dir, &manifest)
}

pub fn load_with_manifest(dir: &Path, manifest: &Manifest) -> Result<(Graph, Split)> {
    let n = manifest.n_nodes;
    let d = manifest.n_features;

    let edge_path = dir.join(&manifest.edge_file);
    let mut edges = Vec::new();
    for (lineno, line) in read_to_string(&edge_path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or_else(|| Error::parse(edge_path.display().to_string(), format!("line {}: expected two ids", lineno + 1)))?
                .parse()
                .map_err(|e| Error::parse(edge_path.display().to_string(), format!("line {}: {e}", lineno + 1)))
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        edges.push((u, v));
    }

    let feat_path = dir.join(&manifest.feature_file);
    let bytes = fs::read(&feat_path).map_err(|e| Error::io(&feat_path, e))?;
    if bytes.len() != n * d * 4 {
        return Err(Error::DimensionMismatch(format!(
            "{} holds {} bytes, expected {} x {} f32 = {}",
            feat_path.display(),
            bytes.len(),
            n,
            d,
            n * d * 4
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let features = Array2::from_shape_vec((n, d), values).expect("length checked above");

    let label_path = dir.join(&manifest.label_file);
    let labels: Vec<usize> = read_to_string(&label_path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse()
                .map_err(|e| Error::parse(label_path.display().to_string(), format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<_>>()?;
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} nodes",
            labels.len(),
            n
        )));
    }

    let split_path = dir.join(&manifest.split_file);
    let split: Split = serde_json::from_str(&read_to_string(&split_path)?)
        .map_err(|e| Error::parse(split_path.display().to_string(), e))?;

    let graph = Graph::from_edges(n, &edges, features, labels, manifest.n_classes, manifest.symmetrize)?;
    split.validate(n)?;
    Ok((graph, split))
}

/// Writes a GraphPack. Features are narrowed to f32.
pub fn save_dataset(dir: impl AsRef<Path>, graph: &Graph, split: &Split) -> Result<()> {
    save_with_manifest(dir.as_ref(), graph, split, Manifest::standard(graph))
}

fn save_with_manifest(dir: &Path, graph: &Graph, split: &Split, manifest: Manifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, f: &mut dyn FnMut(&mut BufWriter<fs::File>) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))
    };

    write("manifest.json", &mut |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    write(&manifest.edge_file, &mut |w| {
        for u in 0..graph.n_nodes() {
            for &v in graph.neighbors(u) {
                writeln!(w, "{u} {v}")?;
            }
        }
        Ok(())
    })?;
    write(&manifest.feature_file, &mut |w| {
        for &x in graph.features().iter() {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
        Ok(())
    })?;
    write(&manifest.label_file, &mut |w| {
        for &l in graph.labels() {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    write(&manifest.split_file, &mut |w| {
        serde_json::to_writer(&mut *w, split).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    Ok(())
}

/// How `convert` obtains the train/validation/test split.
#[derive(Debug, Clone)]
pub enum SplitSpec {
    /// JSON file `{"train": [...], "val": [...], "test": [...]}` holding
    /// original node ids (strings or integers).
    File(PathBuf),
    /// A fixed number of training nodes per class, then `n_val` and `n_test`
    /// further nodes, all drawn from one seeded shuffle.
    PerClass {
        train_per_class: usize,
        n_val: usize,
        n_test: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct ConvertInputs {
    /// Edge list, one pair of original ids per line (whitespace or comma separated).
    pub edges: PathBuf,
    /// CSV: original id followed by the feature values. A non-numeric first
    /// row is treated as a header.
    pub features: PathBuf,
    /// One `id label` pair per line; labels may be arbitrary strings.
    pub labels: PathBuf,
    pub split: SplitSpec,
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split([',', '\t', ' '])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Converts string-keyed inputs into a GraphPack with dense node ids in the
/// order the feature rows appear. Class ids follow the sorted class names.
pub fn convert(inputs: &ConvertInputs, out: impl AsRef<Path>) -> Result<(Graph, Split)> {
    let feat_file = fs::File::open(&inputs.features).map_err(|e| Error::io(&inputs.features, e))?;
    let mut csv = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(BufReader::new(feat_file));
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut values: Vec<f64> = Vec::new();
    let mut width = None;
    for (row_no, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(inputs.features.display().to_string(), e))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().skip(1).map(|s| s.trim().parse::<f64>()).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if row_no == 0 => continue,
            Err(e) => {
                return Err(Error::parse(
                    inputs.features.display().to_string(),
                    format!("row {}: {e}", row_no + 1),
                ))
            }
        };
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::DimensionMismatch(format!(
                "feature row {} has {} values, expected {}",
                row_no + 1,
                row.len(),
                width.unwrap_or(0)
            )));
        }
        let id = rec.get(0).unwrap_or_default().trim().to_string();
        if index.insert(id.clone(), ids.len()).is_some() {
            return Err(Error::parse(inputs.features.display().to_string(), format!("duplicate id {id}")));
        }
        ids.push(id);
        values.extend(row);
    }
    let n = ids.len();
    let d = width.unwrap_or(0);
    let features = Array2::from_shape_vec((n, d), values).expect("rows have equal width");

    let mut raw_labels: Vec<Option<String>> = vec![None; n];
    for (i, line) in read_to_string(&inputs.labels)?.lines().enumerate() {
        let f = split_fields(line);
        if f.is_empty() {
            continue;
        }
        if f.len() != 2 {
            return Err(Error::parse(inputs.labels.display().to_string(), format!("line {}: expected `id label`", i + 1)));
        }
        let node = *index.get(f[0]).ok_or_else(|| {
            Error::parse(inputs.labels.display().to_string(), format!("unknown node id {}", f[0]))
        })?;
        raw_labels[node] = Some(f[1].to_string());
    }
    if let Some(node) = raw_labels.iter().position(Option::is_none) {
        return Err(Error::DimensionMismatch(format!("node {} has no label", ids[node])));
    }
    let names: BTreeSet<String> = raw_labels.iter().flatten().cloned().collect();
    let class_of: BTreeMap<&String, usize> = names.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|l| class_of[l.as_ref().expect("checked")]).collect();

    let mut edges = Vec::new();
    let mut skipped = 0usize;
    for line in read_to_string(&inputs.edges)?.lines() {
        let f = split_fields(line);
        if f.len() < 2 || f[0].starts_with('#') {
            continue;
        }
        match (index.get(f[0]), index.get(f[1])) {
            (Some(&u), Some(&v)) => edges.push((u, v)),
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} edges that reference ids without features");
    }

    let graph = Graph::from_edges(n, &edges, features, labels, names.len(), true)?;

    let split = match &inputs.split {
        SplitSpec::File(path) => {
            let v: serde_json::Value = serde_json::from_str(&read_to_string(path)?)
                .map_err(|e| Error::parse(path.display().to_string(), e))?;
            let field = |name: &str| -> Result<Vec<usize>> {
                let arr = v.get(name).and_then(|x| x.as_array()).ok_or_else(|| {
                    Error::parse(path.display().to_string(), format!("missing array `{name}`"))
                })?;
                arr.iter()
                    .map(|x| {
                        let key = match x {
                            serde_json::Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        index.get(&key).copied().ok_or_else(|| {
                            Error::parse(path.display().to_string(), format!("unknown node id {key}"))
                        })
                    })
                    .collect()
            };
            Split::new(field("train")?, field("val")?, field("test")?)
        }
        SplitSpec::PerClass {
            train_per_class,
            n_val,
            n_test,
            seed,
        } => per_class_split(graph.labels(), graph.n_classes(), *train_per_class, *n_val, *n_test, *seed),
    };
    split.validate(n)?;

    let mut manifest = Manifest::standard(&graph);
    manifest.class_names = Some(names.into_iter().collect());
    save_with_manifest(out.as_ref(), &graph, &split, manifest)?;
    Ok((graph, split))
}

pub(crate) fn per_class_split(
    labels: &[usize],
    n_classes: usize,
    train_per_class: usize,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> Split {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut rng::rng(seed));
    let mut taken = vec![0usize; n_classes];
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for u in order {
        if taken[labels[u]] < train_per_class {
            taken[labels[u]] += 1;
            train.push(u);
        } else {
            rest.push(u);
        }
    }
    let mut val: Vec<usize> = rest.iter().copied().take(n_val).collect();
    let mut test: Vec<usize> = rest.iter().copied().skip(n_val).take(n_test).collect();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Split::new(train, val, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::synthetic::PlantedPartition;

    #[test]
    fn round_trip_is_bit_identical() {
        let (g, s) = PlantedPartition::default().generate(4);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &g, &s).unwrap();
        let (g2, s2) = load_dataset(dir.path()).unwrap();
        assert_eq!(g, g2);
        assert_eq!(s, s2);
    }

    #[test]
    fn triangle_pack() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(p.join("manifest.json"), r#"{"n_nodes":3,"n_features":1,"n_classes":2,"feature_file":"f.bin","edge_file":"e.txt","label_file":"l.txt","split_file":"s.json","symmetrize":true}"#).unwrap();
        fs::write(p.join("e.txt"), "0 1\n1 2\n2 0\n").unwrap();
        fs::write(p.join("f.bin"), [1.0f32, 2.0, 3.0].iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>()).unwrap();
        fs::write(p.join("l.txt"), "0\n1\n1\n").unwrap();
        fs::write(p.join("s.json"), r#"{"train":[0],"val":[1],"test":[2]}"#).unwrap();
        let (g, s) = load_dataset(p).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 3);
        assert_eq!(g.targets().len(), 6);
        assert_eq!(g.features()[[2, 0]], 3.0);
        assert_eq!(s.train, vec![0]);
    }

    #[test]
    fn strict_pack_rejects_one_way_edge() {
        let (g, s) = PlantedPartition::default().generate(2);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &g, &s).unwrap();
        fs::write(dir.path().join("edges.txt"), "0 1\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, Error::AsymmetricEdge(0, 1)), "{err}");
    }

    #[test]
    fn missing_file_and_bad_sizes() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()).unwrap_err(), Error::Io { .. }));

        let (g, s) = PlantedPartition::default().generate(2);
        save_dataset(dir.path(), &g, &s).unwrap();
        fs::write(dir.path().join("features.bin"), [0u8; 12]).unwrap();
        assert!(matches!(load_dataset(dir.path()).unwrap_err(), Error::DimensionMismatch(_)));

        save_dataset(dir.path(), &g, &s).unwrap();
        fs::write(dir.path().join("labels.txt"), "0\n1\n").unwrap();
        assert!(matches!(load_dataset(dir.path()).unwrap_err(), Error::DimensionMismatch(_)));

        save_dataset(dir.path(), &g, &s).unwrap();
        let mut labels = String::new();
        for i in 0..g.n_nodes() {
            labels.push_str(if i == 5 { "9\n" } else { "0\n" });
        }
        fs::write(dir.path().join("labels.txt"), labels).unwrap();
        assert!(matches!(load_dataset(dir.path()).unwrap_err(), Error::LabelOutOfRange { node: 5, .. }));
    }

    #[test]
    fn convert_string_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(p.join("feat.csv"), "id,a,b\npaperA,1,0\npaperB,0,1\npaperC,1,1\npaperD,0,0\n").unwrap();
        fs::write(p.join("edges.txt"), "paperA paperB\npaperC paperB\npaperZ paperA\n").unwrap();
        fs::write(p.join("labels.txt"), "paperA Theory\npaperB AI\npaperC AI\npaperD Theory\n").unwrap();
        fs::write(p.join("split.json"), r#"{"train":["paperA","paperB"],"val":["paperC"],"test":["paperD"]}"#).unwrap();
        let inputs = ConvertInputs {
            edges: p.join("edges.txt"),
            features: p.join("feat.csv"),
            labels: p.join("labels.txt"),
            split: SplitSpec::File(p.join("split.json")),
        };
        let out = p.join("pack");
        let (g, s) = convert(&inputs, &out).unwrap();
        assert_eq!(g.n_nodes(), 4);
        assert_eq!(g.n_edges(), 2);
        assert_eq!(g.labels(), &[1, 0, 0, 1]);
        assert_eq!(s.train, vec![0, 1]);
        let (g2, s2) = load_dataset(&out).unwrap();
        assert_eq!(g, g2);
        assert_eq!(s, s2);
        let m = Manifest::parse(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m.class_names.unwrap(), vec!["AI".to_string(), "Theory".to_string()]);
    }

    #[test]
    fn per_class_split_counts() {
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let s = per_class_split(&labels, 3, 20, 50, 100, 0);
        s.validate(300).unwrap();
        assert_eq!(s.train.len(), 60);
        for c in 0..3 {
            assert_eq!(s.train.iter().filter(|&&u| labels[u] == c).count(), 20);
        }
        assert_eq!(s.val.len(), 50);
        assert_eq!(s.test.len(), 100);
    }
}

//! Two-path statistics of a train split and the imbalance ratios built on
//! them.
//!
//! For an ordered relation pair `(i, j)`, `count_ij` measures how often a
//! path `e1 -r_i-> e2 -r_j-> e3` occurs. The pair ratio is
//! `ψ = 2·max(count_ij, count_ji) / (count_ij + count_ji) − 1` and the dataset
//! ratio `Ψ` is the share of path mass sitting in pairs seen in one order
//! only.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Triple, TripleStore};
use crate::error::{Error, Result};
use crate::eval::csv_field;

/// What one unit of `count_ij` is.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathUnit {
    /// Distinct entity chains `(e1, e2, e3)`.
    #[default]
    Chains,
    /// Distinct middle entities `e2` through which at least one chain runs.
    MiddleEntities,
}

impl FromStr for PathUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chains" => Ok(PathUnit::Chains),
            "middle" | "middle_entities" => Ok(PathUnit::MiddleEntities),
            _ => Err(Error::config(
                "unit",
                format!("unknown path unit '{s}' (expected chains or middle)"),
            )),
        }
    }
}

/// How same-relation pairs `(i, i)` enter `Ψ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalPolicy {
    /// Both orders coincide, so the pair counts as `both`.
    #[default]
    Both,
    Single,
    /// Left out of `Ψ` entirely.
    Exclude,
}

impl FromStr for DiagonalPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(DiagonalPolicy::Both),
            "single" => Ok(DiagonalPolicy::Single),
            "exclude" => Ok(DiagonalPolicy::Exclude),
            _ => Err(Error::config(
                "diagonal",
                format!("unknown diagonal policy '{s}' (expected both, single or exclude)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountPolicy {
    pub unit: PathUnit,
    /// Drop chains with a repeated entity (`e1 = e2`, `e2 = e3` or `e1 = e3`).
    pub exclude_degenerate: bool,
    pub diagonal: DiagonalPolicy,
}

impl CountPolicy {
    /// The policy that matches the published benchmark ratios: middle
    /// entities as the unit, same-relation pairs left out.
    pub fn benchmark() -> Self {
        CountPolicy {
            unit: PathUnit::MiddleEntities,
            exclude_degenerate: false,
            diagonal: DiagonalPolicy::Exclude,
        }
    }
}

impl fmt::Display for CountPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unit={:?}, diagonal={:?}, exclude_degenerate={}",
            self.unit, self.diagonal, self.exclude_degenerate
        )
    }
}

/// Dense `|R|×|R|` matrix of two-path counts over original relations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub num_relations: usize,
    pub relation_names: Vec<String>,
    pub unit: PathUnit,
    pub exclude_degenerate: bool,
    counts: Vec<u64>,
}

impl PairCounts {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.num_relations + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Builds counts from a row-major `|R|×|R|` matrix.
    pub fn from_matrix(relation_names: Vec<String>, counts: Vec<u64>, unit: PathUnit) -> Result<Self> {
        let nr = relation_names.len();
        if counts.len() != nr * nr {
            return Err(Error::Mismatch(format!(
                "{} counts for {nr} relations",
                counts.len()
            )));
        }
        Ok(PairCounts {
            num_relations: nr,
            relation_names,
            unit,
            exclude_degenerate: false,
            counts,
        })
    }
}

/// Chain counts with every path included.
pub fn count_two_paths(store: &TripleStore) -> PairCounts {
    count_two_paths_with(store, PathUnit::Chains, false)
}

/// Joins train triples on their middle entity; cost `Σ_e in(e)·out(e)`.
pub fn count_two_paths_with(store: &TripleStore, unit: PathUnit, exclude_degenerate: bool) -> PairCounts {
    let nr = store.num_relations();
    let counts = join_counts(store.train(), store.num_entities(), nr, unit, exclude_degenerate);
    PairCounts {
        num_relations: nr,
        relation_names: store.vocab().relation_names().to_vec(),
        unit,
        exclude_degenerate,
        counts,
    }
}

fn join_counts(
    triples: &[Triple],
    num_entities: usize,
    nr: usize,
    unit: PathUnit,
    exclude_degenerate: bool,
) -> Vec<u64> {
    // Incoming (head, relation) and outgoing (relation, tail) per entity.
    let mut incoming: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num_entities];
    let mut outgoing: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num_entities];
    for t in triples {
        incoming[t.tail as usize].push((t.head, t.relation));
        outgoing[t.head as usize].push((t.relation, t.tail));
    }
    let middles: Vec<usize> = (0..num_entities)
        .filter(|&e| !incoming[e].is_empty() && !outgoing[e].is_empty())
        .collect();
    middles
        .par_chunks(256)
        .fold(
            || (vec![0u64; nr * nr], vec![u32::MAX; nr * nr]),
            |(mut counts, mut stamp), chunk| {
                for &e in chunk {
                    for &(h, ri) in &incoming[e] {
                        for &(rj, t) in &outgoing[e] {
                            let mid = e as u32;
                            if exclude_degenerate && (h == mid || mid == t || h == t) {
                                continue;
                            }
                            let cell = ri as usize * nr + rj as usize;
                            match unit {
                                PathUnit::Chains => counts[cell] += 1,
                                PathUnit::MiddleEntities => {
                                    if stamp[cell] != mid {
                                        stamp[cell] = mid;
                                        counts[cell] += 1;
                                    }
                                }
                            }
                        }
                    }
                }
                (counts, stamp)
            },
        )
        .map(|(counts, _)| counts)
        .reduce(
            || vec![0u64; nr * nr],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// ψ of the unordered pair `{i, j}`.
pub fn pair_imbalance(counts: &PairCounts, i: usize, j: usize) -> Result<f64> {
    psi(counts.get(i, j), counts.get(j, i))
}

fn psi(a: u64, b: u64) -> Result<f64> {
    if a == 0 && b == 0 {
        return Err(Error::Undefined("ψ of a pair with no paths in either order".into()));
    }
    Ok(a.abs_diff(b) as f64 / (a + b) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Both,
    Single,
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub rel_i: usize,
    pub rel_j: usize,
    pub name_i: String,
    pub name_j: String,
    pub count_ij: u64,
    pub count_ji: u64,
    pub psi: f64,
    pub kind: PairKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceReport {
    pub policy: CountPolicy,
    pub num_relations: usize,
    /// Dataset ratio `Ψ`.
    #[serde(rename = "Psi")]
    pub psi: f64,
    pub triple_both: u64,
    pub triple_single: u64,
    pub both_pairs: usize,
    pub single_pairs: usize,
    /// Unordered pairs `i ≤ j` with at least one path.
    pub pairs: Vec<PairStat>,
}

/// Classifies every pair with paths as `both` or `single` and aggregates
/// `Ψ = single / (both + single)`.
pub fn dataset_imbalance(counts: &PairCounts, diagonal: DiagonalPolicy) -> Result<ImbalanceReport> {
    let nr = counts.num_relations;
    let mut pairs = Vec::new();
    let (mut triple_both, mut triple_single) = (0u64, 0u64);
    let (mut both_pairs, mut single_pairs) = (0, 0);
    for i in 0..nr {
        for j in i..nr {
            let (a, b) = (counts.get(i, j), counts.get(j, i));
            if a == 0 && b == 0 {
                continue;
            }
            let kind = if i == j {
                match diagonal {
                    DiagonalPolicy::Both => {
                        triple_both += a;
                        both_pairs += 1;
                    }
                    DiagonalPolicy::Single => {
                        triple_single += a;
                        single_pairs += 1;
                    }
                    DiagonalPolicy::Exclude => {}
                }
                PairKind::Diagonal
            } else if a > 0 && b > 0 {
                triple_both += a + b;
                both_pairs += 1;
                PairKind::Both
            } else {
                triple_single += a + b;
                single_pairs += 1;
                PairKind::Single
            };
            pairs.push(PairStat {
                rel_i: i,
                rel_j: j,
                name_i: counts.relation_names[i].clone(),
                name_j: counts.relation_names[j].clone(),
                count_ij: a,
                count_ji: b,
                psi: if i == j { 0.0 } else { psi(a, b)? },
                kind,
            });
        }
    }
    let total = triple_both + triple_single;
    if total == 0 {
        return Err(Error::Undefined("no two-paths to compute Ψ from".into()));
    }
    Ok(ImbalanceReport {
        policy: CountPolicy {
            unit: counts.unit,
            exclude_degenerate: counts.exclude_degenerate,
            diagonal,
        },
        num_relations: nr,
        psi: triple_single as f64 / total as f64,
        triple_both,
        triple_single,
        both_pairs,
        single_pairs,
        pairs,
    })
}

/// Counts and aggregates in one go.
pub fn analyze(store: &TripleStore, policy: CountPolicy) -> Result<ImbalanceReport> {
    let counts = count_two_paths_with(store, policy.unit, policy.exclude_degenerate);
    dataset_imbalance(&counts, policy.diagonal)
}

impl ImbalanceReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcFormat {
    Csv,
    Svg,
}

/// Writes one row or arc per off-diagonal pair.
pub fn export_arc_data(report: &ImbalanceReport, out: &Path, format: ArcFormat) -> Result<()> {
    let body = match format {
        ArcFormat::Csv => arc_csv(report),
        ArcFormat::Svg => arc_svg(report),
    };
    let mut file = fs::File::create(out).map_err(|e| Error::io(out, e))?;
    file.write_all(body.as_bytes()).map_err(|e| Error::io(out, e))
}

fn off_diagonal(report: &ImbalanceReport) -> impl Iterator<Item = &PairStat> {
    report.pairs.iter().filter(|p| p.kind != PairKind::Diagonal)
}

fn arc_csv(report: &ImbalanceReport) -> String {
    let mut s = String::from("rel_i,rel_j,count_ij,count_ji,psi\n");
    for p in off_diagonal(report) {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_field(&p.name_i),
            csv_field(&p.name_j),
            p.count_ij,
            p.count_ji,
            p.psi
        ));
    }
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Blue at ψ = 0 to gray at ψ = 1.
fn arc_color(psi: f64) -> String {
    let blue = (31.0, 119.0, 180.0);
    let gray = (160.0, 160.0, 160.0);
    let mix = |a: f64, b: f64| (a + (b - a) * psi.clamp(0.0, 1.0)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(blue.0, gray.0),
        mix(blue.1, gray.1),
        mix(blue.2, gray.2)
    )
}

fn arc_svg(report: &ImbalanceReport) -> String {
    let nr = report.num_relations.max(1);
    let spacing = 24.0;
    let margin = 40.0;
    let width = margin * 2.0 + spacing * (nr.saturating_sub(1)) as f64;
    let baseline = margin + spacing * nr as f64 / 2.0;
    let height = baseline + 160.0;
    let x = |r: usize| margin + spacing * r as f64;

    let mut arcs: Vec<&PairStat> = off_diagonal(report).collect();
    arcs.sort_by_key(|p| p.count_ij + p.count_ji);
    let max = arcs.last().map(|p| p.count_ij + p.count_ji).unwrap_or(1).max(1) as f64;

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{margin}\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\">Ψ = {:.4}</text>\n",
        report.psi
    );
    for p in arcs {
        let (x1, x2) = (x(p.rel_i), x(p.rel_j));
        let r = (x2 - x1).abs() / 2.0;
        let rel = (p.count_ij + p.count_ji) as f64 / max;
        s.push_str(&format!(
            "<path d=\"M {x1:.1} {baseline:.1} A {r:.1} {r:.1} 0 0 1 {x2:.1} {baseline:.1}\" \
             fill=\"none\" stroke=\"{}\" stroke-width=\"{:.2}\" stroke-opacity=\"{:.3}\">\
             <title>{} / {}: {} vs {}, ψ = {:.3}</title></path>\n",
            arc_color(p.psi),
            0.5 + 7.5 * rel,
            0.1 + 0.9 * rel,
            xml_escape(&p.name_i),
            xml_escape(&p.name_j),
            p.count_ij,
            p.count_ji,
            p.psi
        ));
    }
    let names: Vec<String> = (0..report.num_relations)
        .map(|r| {
            report
                .pairs
                .iter()
                .find_map(|p| {
                    if p.rel_i == r {
                        Some(p.name_i.clone())
                    } else if p.rel_j == r {
                        Some(p.name_j.clone())
                    } else {
                        None
                    }
                })
                .unwrap_or_else(|| r.to_string())
        })
        .collect();
    for (r, name) in names.iter().enumerate() {
        let (cx, ty) = (x(r), baseline + 8.0);
        s.push_str(&format!(
            "<circle cx=\"{cx:.1}\" cy=\"{baseline:.1}\" r=\"2.5\" fill=\"black\"/>\n\
             <text x=\"{cx:.1}\" y=\"{ty:.1}\" font-family=\"sans-serif\" font-size=\"9\" \
             transform=\"rotate(60 {cx:.1} {ty:.1})\">{}</text>\n",
            xml_escape(name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

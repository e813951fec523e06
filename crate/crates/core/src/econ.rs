//! Equipment selection by entropy-weighted cost-benefit scoring.
//!
//! Candidate equipment is compared within its role group (detection
//! gear vs rescue gear) on positive indicators — detection range,
//! stability, feasibility. Indicator columns are standardized by their
//! Euclidean norm, converted to column-wise shares, and weighted by
//! information entropy: a column whose values barely differ carries
//! little information and gets little weight. Each record's benefit is
//! its weighted share sum; its cost share uses a log-compressed total
//! `ln(1 + purchase + maintenance)` normalized within the group, so a
//! price tag two orders of magnitude above the rest (a capital ship vs
//! a dinghy) registers as more expensive without drowning out every
//! benefit difference. Ranking is by benefit over cost share,
//! descending.

use std::fmt;
use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EconError {
    #[error("group needs at least 2 records to compare, got {0}")]
    TooFewRecords(usize),
    #[error("record {name}: indicators must be positive and finite, got {value}")]
    BadIndicator { name: String, value: f64 },
    #[error("record {name}: ratings must lie in [0, 1], got {value}")]
    BadRating { name: String, value: f64 },
    #[error("record {name}: costs must be nonnegative and finite")]
    BadCost { name: String },
    #[error("record {name}: total cost is zero, cost-effectiveness is undefined")]
    ZeroCost { name: String },
    #[error("records in one analysis must share a role; found both detection and rescue")]
    MixedRoles,
    #[error("all records have identical indicator rows; nothing distinguishes them")]
    NoContrast,
    #[error("csv row {row}: {message}")]
    BadCsv { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Detection,
    Rescue,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Detection => "detection",
            Role::Rescue => "rescue",
        })
    }
}

/// One candidate: costs in currency units, then the three positive
/// indicators `[detection_range_m, stability, feasibility]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquipmentRecord {
    pub name: String,
    pub role: Role,
    pub purchase_cost: f64,
    pub maintenance_cost: f64,
    pub detection_range_m: f64,
    pub stability: f64,
    pub feasibility: f64,
}

impl EquipmentRecord {
    fn indicators(&self) -> [f64; 3] {
        [self.detection_range_m, self.stability, self.feasibility]
    }

    fn total_cost(&self) -> f64 {
        self.purchase_cost + self.maintenance_cost
    }

    fn validate(&self) -> Result<(), EconError> {
        let bad_cost = |c: f64| !c.is_finite() || c < 0.0;
        if bad_cost(self.purchase_cost) || bad_cost(self.maintenance_cost) {
            return Err(EconError::BadCost { name: self.name.clone() });
        }
        if !(self.detection_range_m > 0.0 && self.detection_range_m.is_finite()) {
            return Err(EconError::BadIndicator {
                name: self.name.clone(),
                value: self.detection_range_m,
            });
        }
        for rating in [self.stability, self.feasibility] {
            if !(0.0..=1.0).contains(&rating) || !rating.is_finite() {
                return Err(EconError::BadRating { name: self.name.clone(), value: rating });
            }
            if rating == 0.0 {
                // A zero rating would zero its standardized share and
                // break nothing, but a rating scale starting at 0 makes
                // the entropy share degenerate; require strictly positive.
                return Err(EconError::BadRating { name: self.name.clone(), value: rating });
            }
        }
        Ok(())
    }
}

/// Entropy weights for a positive `rows x cols` indicator matrix.
/// Returns the weight per column and whether the uniform fallback fired
/// (all columns carried zero information).
pub fn entropy_weights(matrix: &[Vec<f64>]) -> (Vec<f64>, bool) {
    let n = matrix.len();
    let cols = matrix[0].len();
    let mut weights = vec![0.0; cols];
    let mut informations = vec![0.0; cols];
    for j in 0..cols {
        let norm = matrix.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        let shares: Vec<f64> = {
            let z: Vec<f64> = matrix.iter().map(|r| r[j] / norm).collect();
            let sum: f64 = z.iter().sum();
            z.into_iter().map(|v| v / sum).collect()
        };
        let mut h = 0.0;
        for &p in &shares {
            if p > 0.0 {
                h += p * p.ln();
            }
        }
        let entropy = -h / (n as f64).ln();
        informations[j] = 1.0 - entropy;
    }
    let total: f64 = informations.iter().sum();
    if total <= cols as f64 * 1e-12 {
        // Every column is (numerically) uniform: no information anywhere,
        // fall back to equal weights.
        weights.fill(1.0 / cols as f64);
        return (weights, true);
    }
    for j in 0..cols {
        weights[j] = informations[j] / total;
    }
    (weights, false)
}

/// One scored record, in the analyzed group's original order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEquipment {
    pub name: String,
    pub role: Role,
    /// Entropy-weighted share sum over the indicator columns.
    pub benefit: f64,
    /// Log-compressed share of the group's total cost.
    pub cost_share: f64,
    /// `benefit / cost_share`, the ranking key.
    pub cer: f64,
    /// 1 = best in group.
    pub rank: usize,
}

/// Scores of one role group plus the weights that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub role: Role,
    pub weights: Vec<f64>,
    pub uniform_weights: bool,
    pub rows: Vec<ScoredEquipment>,
}

impl GroupReport {
    /// Rows sorted best-first.
    pub fn ranking(&self) -> Vec<&ScoredEquipment> {
        let mut sorted: Vec<&ScoredEquipment> = self.rows.iter().collect();
        sorted.sort_by_key(|r| r.rank);
        sorted
    }

    pub fn best(&self) -> &ScoredEquipment {
        self.ranking()[0]
    }
}

/// Scores one role group. All records must share a role and there must
/// be at least two of them.
pub fn score_group(records: &[EquipmentRecord]) -> Result<GroupReport, EconError> {
    if records.len() < 2 {
        return Err(EconError::TooFewRecords(records.len()));
    }
    let role = records[0].role;
    for r in records {
        r.validate()?;
        if r.role != role {
            return Err(EconError::MixedRoles);
        }
        if r.total_cost() == 0.0 {
            return Err(EconError::ZeroCost { name: r.name.clone() });
        }
    }
    let matrix: Vec<Vec<f64>> = records.iter().map(|r| r.indicators().to_vec()).collect();
    if matrix.iter().all(|row| row == &matrix[0]) {
        return Err(EconError::NoContrast);
    }
    let (weights, uniform_weights) = entropy_weights(&matrix);

    let cols = weights.len();
    let mut shares = vec![vec![0.0; cols]; records.len()];
    for j in 0..cols {
        let norm = matrix.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        let col_sum: f64 = matrix.iter().map(|r| r[j] / norm).sum();
        for (i, row) in matrix.iter().enumerate() {
            shares[i][j] = row[j] / norm / col_sum;
        }
    }

    let log_costs: Vec<f64> = records.iter().map(|r| r.total_cost().ln_1p()).collect();
    let log_total: f64 = log_costs.iter().sum();

    let mut rows: Vec<ScoredEquipment> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let benefit: f64 = (0..cols).map(|j| weights[j] * shares[i][j]).sum();
            let cost_share = log_costs[i] / log_total;
            ScoredEquipment {
                name: r.name.clone(),
                role,
                benefit,
                cost_share,
                cer: benefit / cost_share,
                rank: 0,
            }
        })
        .collect();

    // Rank: higher cost-effectiveness first; ties prefer the cheaper
    // record, then the lexically smaller name.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| {
        rows[j]
            .cer
            .total_cmp(&rows[i].cer)
            .then(records[i].total_cost().total_cmp(&records[j].total_cost()))
            .then_with(|| records[i].name.cmp(&records[j].name))
    });
    for (rank, &i) in order.iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    Ok(GroupReport { role, weights: weights.clone(), uniform_weights, rows })
}

/// Scores every role present in `records`, detection first.
pub fn score_by_role(records: &[EquipmentRecord]) -> Result<Vec<GroupReport>, EconError> {
    let mut reports = Vec::new();
    for role in [Role::Detection, Role::Rescue] {
        let group: Vec<EquipmentRecord> =
            records.iter().filter(|r| r.role == role).cloned().collect();
        if !group.is_empty() {
            reports.push(score_group(&group)?);
        }
    }
    Ok(reports)
}

/// Reads records from CSV with the header
/// `name,role,purchase_cost,maintenance_cost,detection_range_m,stability,feasibility`;
/// `role` is `detection` or `rescue`.
pub fn read_equipment_csv<R: Read>(reader: R) -> Result<Vec<EquipmentRecord>, EconError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let expected = ["name", "role", "purchase_cost", "maintenance_cost", "detection_range_m", "stability", "feasibility"];
    let headers = csv_reader
        .headers()
        .map_err(|e| EconError::BadCsv { row: 1, message: e.to_string() })?;
    if headers.iter().ne(expected) {
        return Err(EconError::BadCsv {
            row: 1,
            message: format!("expected header {:?}, got {:?}", expected.join(","), headers),
        });
    }
    let mut records = Vec::new();
    for (i, row) in csv_reader.records().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| EconError::BadCsv { row: row_no, message: e.to_string() })?;
        if row.len() != expected.len() {
            return Err(EconError::BadCsv {
                row: row_no,
                message: format!("expected {} fields, got {}", expected.len(), row.len()),
            });
        }
        let field = |k: usize| -> Result<f64, EconError> {
            row[k].trim().parse::<f64>().map_err(|_| EconError::BadCsv {
                row: row_no,
                message: format!("field {} is not a number: {:?}", expected[k], &row[k]),
            })
        };
        let role = match row[1].trim() {
            "detection" => Role::Detection,
            "rescue" => Role::Rescue,
            other => {
                return Err(EconError::BadCsv {
                    row: row_no,
                    message: format!("unknown role {other:?} (want detection or rescue)"),
                })
            }
        };
        let record = EquipmentRecord {
            name: row[0].trim().to_string(),
            role,
            purchase_cost: field(2)?,
            maintenance_cost: field(3)?,
            detection_range_m: field(4)?,
            stability: field(5)?,
            feasibility: field(6)?,
        };
        record.validate().map_err(|e| EconError::BadCsv { row: row_no, message: e.to_string() })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes `name,role,benefit,cost_share,cer,rank` rows, groups in the
/// given order, each group best-first.
pub fn write_report_csv<W: Write>(w: &mut W, reports: &[GroupReport]) -> std::io::Result<()> {
    writeln!(w, "name,role,benefit,cost_share,cer,rank")?;
    for report in reports {
        for row in report.ranking() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.name, row.role, row.benefit, row.cost_share, row.cer, row.rank
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(name: &str, role: Role, c1: f64, c2: f64, d: f64, s: f64, f: f64) -> EquipmentRecord {
        EquipmentRecord {
            name: name.to_string(),
            role,
            purchase_cost: c1,
            maintenance_cost: c2,
            detection_range_m: d,
            stability: s,
            feasibility: f,
        }
    }

    /// The worked survey-equipment comparison used across tests.
    fn survey_detection() -> Vec<EquipmentRecord> {
        vec![
            record("Tritech SEK SK150 Side Scan Sonar", Role::Detection, 7000.0, 1100.0, 200.0, 0.8, 0.8),
            record("FIFISH PRO V6 PLUS Underwater Exploration Drone", Role::Detection, 6000.0, 1600.0, 150.0, 0.8, 0.8),
            record("REMUS Underwater Machines", Role::Detection, 15000.0, 3000.0, 150.0, 0.9, 1.0),
            record("BlueComm 200 underwater communications equipment", Role::Detection, 11500.0, 1580.0, 100.0, 0.7, 0.8),
        ]
    }

    fn survey_rescue() -> Vec<EquipmentRecord> {
        vec![
            record("deep-diving survival boat", Role::Rescue, 500_000.0, 19_200.0, 1000.0, 0.8, 0.8),
            record("Underwater rescue by divers", Role::Rescue, 6000.0, 1600.0, 150.0, 0.7, 0.6),
            record("Zodiac Milpro SRMN 600 lifeboat", Role::Rescue, 15_000.0, 3000.0, 150.0, 0.7, 0.9),
        ]
    }

    #[test]
    fn standardization_is_euclidean() {
        // A (3, 4) column standardizes by its norm 5 to (0.6, 0.8), and
        // the shares that feed the entropy are 3/7 and 4/7.
        let norm = (3.0f64 * 3.0 + 4.0 * 4.0).sqrt();
        assert_eq!(norm, 5.0);
        assert_eq!(3.0 / norm, 0.6);
        assert_eq!(4.0 / norm, 0.8);
        // entropy_weights consumes the same standardization internally;
        // verify through a two-column matrix with one contrast column.
        let m = vec![vec![3.0, 1.0], vec![4.0, 1.0]];
        let (w, uniform) = entropy_weights(&m);
        assert!(!uniform);
        // Second column has identical entries: zero information.
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!(w[1].abs() < 1e-12);
    }

    #[test]
    fn entropy_of_quarter_split_matches_hand_value() {
        // Column (1, 3): shares (0.25, 0.75), entropy 0.811278 in base 2.
        let m = vec![vec![1.0], vec![3.0]];
        let shares = [0.25f64, 0.75];
        let hand: f64 = -shares.iter().map(|p| p * p.ln()).sum::<f64>() / 2.0f64.ln();
        assert!((hand - 0.8112781244591328).abs() < 1e-15);
        let (w, uniform) = entropy_weights(&m);
        assert!(!uniform);
        assert_eq!(w, vec![1.0], "single column takes all weight");
    }

    #[test]
    fn weights_match_independent_recomputation() {
        let records = survey_detection();
        let matrix: Vec<Vec<f64>> = records
            .iter()
            .map(|r| vec![r.detection_range_m, r.stability, r.feasibility])
            .collect();
        let (w, _) = entropy_weights(&matrix);
        assert!((w[0] - 0.760402736642).abs() < 1e-9);
        assert!((w[1] - 0.105172126337).abs() < 1e-9);
        assert!((w[2] - 0.134425137021).abs() < 1e-9);
        // Range dominates; ratings split the remainder roughly 0.1/0.13.
        assert!((w[0] - 0.76).abs() < 0.01);
        assert!((w[1] - 0.105).abs() < 0.01);
        assert!((w[2] - 0.134).abs() < 0.01);
    }

    #[test]
    fn weights_match_bruteforce_on_wide_matrix() {
        let m = vec![
            vec![2.0, 7.0, 0.4, 11.0],
            vec![3.0, 7.5, 0.9, 10.0],
            vec![5.0, 6.0, 0.2, 12.0],
            vec![4.0, 8.0, 0.7, 9.0],
            vec![1.0, 7.2, 0.5, 13.0],
        ];
        let (w, uniform) = entropy_weights(&m);
        assert!(!uniform);

        let n = m.len();
        let cols = m[0].len();
        let mut info = vec![0.0; cols];
        for j in 0..cols {
            let norm: f64 = m.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
            let z: Vec<f64> = m.iter().map(|r| r[j] / norm).collect();
            let s: f64 = z.iter().sum();
            let h: f64 = z.iter().map(|v| (v / s) * (v / s).ln()).sum();
            info[j] = 1.0 + h / (n as f64).ln();
        }
        let total: f64 = info.iter().sum();
        for j in 0..cols {
            assert!((w[j] - info[j] / total).abs() < 1e-10, "column {j}");
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_are_scale_invariant() {
        let records = survey_detection();
        let base: Vec<Vec<f64>> = records
            .iter()
            .map(|r| vec![r.detection_range_m, r.stability, r.feasibility])
            .collect();
        let mut scaled = base.clone();
        for row in &mut scaled {
            row[0] *= 4.0; // powers of two keep the algebra exact
        }
        let (w0, _) = entropy_weights(&base);
        let (w1, _) = entropy_weights(&scaled);
        assert_eq!(w0, w1);
    }

    #[test]
    fn uniform_fallback_when_nothing_differs_between_columns() {
        // Two columns, both with identical entries per column: zero
        // information everywhere.
        let m = vec![vec![2.0, 5.0], vec![2.0, 5.0], vec![2.0, 5.0]];
        let (w, uniform) = entropy_weights(&m);
        assert!(uniform);
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn survey_detection_scores_match_frozen_values() {
        let report = score_group(&survey_detection()).unwrap();
        assert_eq!(report.role, Role::Detection);
        assert!(!report.uniform_weights);
        let expect = [
            ("Tritech SEK SK150 Side Scan Sonar", 0.311390054470, 0.241844856504, 1.287561203371, 1),
            ("FIFISH PRO V6 PLUS Underwater Exploration Drone", 0.248023159750, 0.240132876696, 1.032857987470, 2),
            ("REMUS Underwater Machines", 0.259217149699, 0.263300865151, 0.984490307506, 3),
            ("BlueComm 200 underwater communications equipment", 0.181369636081, 0.254721401648, 0.712031399434, 4),
        ];
        for (row, (name, benefit, cost, cer, rank)) in report.rows.iter().zip(expect) {
            assert_eq!(row.name, name);
            assert!((row.benefit - benefit).abs() < 1e-9, "{name} benefit {}", row.benefit);
            assert!((row.cost_share - cost).abs() < 1e-9, "{name} cost {}", row.cost_share);
            assert!((row.cer - cer).abs() < 1e-9, "{name} cer {}", row.cer);
            assert_eq!(row.rank, rank, "{name}");
        }
        assert_eq!(report.best().name, "Tritech SEK SK150 Side Scan Sonar");
    }

    #[test]
    fn survey_rescue_scores_match_frozen_values() {
        let report = score_group(&survey_rescue()).unwrap();
        let expect = [
            ("deep-diving survival boat", 0.753394280696, 1.825902086654, 1),
            ("Underwater rescue by divers", 0.121160735367, 0.432443745519, 2),
            ("Zodiac Milpro SRMN 600 lifeboat", 0.125444983937, 0.408338526590, 3),
        ];
        for (row, (name, benefit, cer, rank)) in report.rows.iter().zip(expect) {
            assert_eq!(row.name, name);
            assert!((row.benefit - benefit).abs() < 1e-9);
            assert!((row.cer - cer).abs() < 1e-9);
            assert_eq!(row.rank, rank);
        }
        // The expensive boat still wins: its benefit dominates once cost
        // enters logarithmically rather than linearly.
        assert_eq!(report.best().name, "deep-diving survival boat");
    }

    #[test]
    fn dominated_record_ranks_below_its_dominator() {
        let records = vec![
            record("strong", Role::Detection, 1000.0, 100.0, 220.0, 0.9, 0.9),
            record("weak", Role::Detection, 2000.0, 300.0, 180.0, 0.8, 0.8),
        ];
        let report = score_group(&records).unwrap();
        let strong = report.rows.iter().find(|r| r.name == "strong").unwrap();
        let weak = report.rows.iter().find(|r| r.name == "weak").unwrap();
        assert!(strong.cer > weak.cer);
        assert_eq!(strong.rank, 1);
        assert_eq!(weak.rank, 2);
    }

    #[test]
    fn raising_a_cost_lowers_its_cost_effectiveness() {
        let base = survey_detection();
        let score0 = score_group(&base).unwrap().rows[1].cer;
        let mut pricier = base.clone();
        pricier[1].purchase_cost *= 3.0;
        let score1 = score_group(&pricier).unwrap().rows[1].cer;
        assert!(score1 < score0);
    }

    #[test]
    fn identical_cer_breaks_ties_by_cost_then_name() {
        // Two truly identical offers differing only by name: same CER.
        let records = vec![
            record("bravo", Role::Rescue, 100.0, 10.0, 150.0, 0.8, 0.8),
            record("alpha", Role::Rescue, 100.0, 10.0, 150.0, 0.8, 0.8),
            record("cheap", Role::Rescue, 40.0, 5.0, 75.0, 0.4, 0.4),
        ];
        let report = score_group(&records).unwrap();
        let ranking: Vec<&str> = report.ranking().iter().map(|r| r.name.as_str()).collect();
        assert_eq!(ranking[0], "alpha", "name breaks the final tie");
        assert_eq!(ranking[1], "bravo");
    }

    #[test]
    fn group_validation_errors() {
        assert!(matches!(
            score_group(&survey_detection()[..1]),
            Err(EconError::TooFewRecords(1))
        ));
        let mut mixed = survey_detection();
        mixed[1].role = Role::Rescue;
        assert!(matches!(score_group(&mixed), Err(EconError::MixedRoles)));
        let mut free = survey_detection();
        free[0].purchase_cost = 0.0;
        free[0].maintenance_cost = 0.0;
        assert!(matches!(score_group(&free), Err(EconError::ZeroCost { .. })));
        let same = vec![
            record("a", Role::Detection, 10.0, 1.0, 100.0, 0.8, 0.8),
            record("b", Role::Detection, 20.0, 2.0, 100.0, 0.8, 0.8),
        ];
        assert!(matches!(score_group(&same), Err(EconError::NoContrast)));
        let mut bad = survey_detection();
        bad[2].stability = 1.4;
        assert!(matches!(score_group(&bad), Err(EconError::BadRating { .. })));
        bad[2].stability = 0.9;
        bad[3].detection_range_m = -5.0;
        assert!(matches!(score_group(&bad), Err(EconError::BadIndicator { .. })));
    }

    #[test]
    fn csv_roundtrip_and_rejections() {
        let text = "name,role,purchase_cost,maintenance_cost,detection_range_m,stability,feasibility\n\
                    probe,detection,7000,1100,200,0.8,0.8\n\
                    raft,rescue,15000,3000,150,0.7,0.9\n";
        let records = read_equipment_csv(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].name, "probe");
        assert_eq!(records[1].role, Role::Rescue);
        assert_eq!(records[1].detection_range_m, 150.0);

        let bad_role = text.replace("rescue", "salvage");
        let err = read_equipment_csv(bad_role.as_bytes()).unwrap_err();
        assert!(matches!(err, EconError::BadCsv { row: 3, .. }), "{err}");

        let bad_number = text.replace("1100", "eleven");
        assert!(read_equipment_csv(bad_number.as_bytes()).is_err());

        let bad_header = text.replace("stability", "stbl");
        assert!(matches!(
            read_equipment_csv(bad_header.as_bytes()),
            Err(EconError::BadCsv { row: 1, .. })
        ));

        let bad_rating = text.replace("0.7,0.9", "1.7,0.9");
        assert!(read_equipment_csv(bad_rating.as_bytes()).is_err());
    }

    #[test]
    fn report_csv_lists_groups_best_first() {
        let reports = score_by_role(
            &survey_detection().into_iter().chain(survey_rescue()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "name,role,benefit,cost_share,cer,rank");
        assert!(lines[1].starts_with("Tritech SEK SK150 Side Scan Sonar,detection,"));
        assert!(lines[1].ends_with(",1"));
        assert!(lines[5].starts_with("deep-diving survival boat,rescue,"));
        assert_eq!(lines.len(), 8);
    }
}

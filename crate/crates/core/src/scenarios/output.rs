use std::io::{self, Write};

use super::{
    format_mark, utilization, Demand, ExceedanceRow, FleetPoint, HourRow, Scenario, ScenarioError,
    ScenarioRow, StaffRow,
};
use crate::staffing::{staff_count, Criterion, RATIO_TOL};

/// Tolerance of the utilization re-check.
pub const VERIFY_TOL: f64 = 1e-9;

/// Delimited text with one header row; numbers use shortest round-trip form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Union of batch indices, ascending.
fn n_columns<'a>(lists: impl Iterator<Item = &'a Vec<(u64, u64)>>) -> Vec<u64> {
    let mut ns: Vec<u64> = lists.flat_map(|l| l.iter().map(|&(n, _)| n)).collect();
    ns.sort_unstable();
    ns.dedup();
    ns
}

fn staff_cells(ns: &[u64], staff: &[(u64, u64)]) -> Vec<String> {
    ns.iter()
        .map(|n| {
            staff
                .iter()
                .find(|(m, _)| m == n)
                .map(|(_, k)| k.to_string())
                .unwrap_or_default()
        })
        .collect()
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(io::Error::other)?;
        for row in &self.rows {
            out.write_record(row).map_err(io::Error::other)?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("cells are UTF-8")
    }

    pub fn parse_csv(text: &str) -> Result<Self, ScenarioError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(ScenarioError::csv)?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()
            .map_err(ScenarioError::csv)?;
        Ok(Self { header, rows })
    }
}

/// Columns: `label, lambda_per_hour, c_p0, c_p1, util_p0, util_p1,
/// staff_n<k>…, staff_criterion, mu_per_hour, mark_mean, days_per_year,
/// alt_days_per_year, alt_lambda_per_hour, alt_c_p0, alt_c_p1`.
pub fn rows_table(rows: &[ScenarioRow]) -> Table {
    let ns = n_columns(rows.iter().map(|r| &r.staff));
    let mut header: Vec<String> = [
        "label",
        "lambda_per_hour",
        "c_p0",
        "c_p1",
        "util_p0",
        "util_p1",
    ]
    .map(String::from)
    .to_vec();
    header.extend(ns.iter().map(|n| format!("staff_n{n}")));
    header.extend(
        [
            "staff_criterion",
            "mu_per_hour",
            "mark_mean",
            "days_per_year",
            "alt_days_per_year",
            "alt_lambda_per_hour",
            "alt_c_p0",
            "alt_c_p1",
        ]
        .map(String::from),
    );
    let body = rows
        .iter()
        .map(|r| {
            let mut cells = vec![
                r.label.clone(),
                num(r.lambda_per_hour),
                num(r.c_p0),
                num(r.c_p1),
                num(r.util_p0),
                num(r.util_p1),
            ];
            cells.extend(staff_cells(&ns, &r.staff));
            let s = r.sensitivity;
            cells.extend([
                r.staff_criterion.name().to_string(),
                num(r.mu_per_hour),
                num(r.mark_mean),
                opt(r.days_per_year),
                opt(s.map(|s| s.days_per_year)),
                opt(s.map(|s| s.lambda_per_hour)),
                opt(s.map(|s| s.c_p0)),
                opt(s.map(|s| s.c_p1)),
            ]);
            cells
        })
        .collect();
    Table { header, rows: body }
}

/// Columns: `label, lambda_per_hour, criterion, epsilon, c, achieved, util,
/// staff_n<k>…, mu_per_hour, mark_mean`.
pub fn staff_table(rows: &[StaffRow]) -> Table {
    let ns = n_columns(rows.iter().map(|r| &r.staff));
    let mut header: Vec<String> = [
        "label",
        "lambda_per_hour",
        "criterion",
        "epsilon",
        "c",
        "achieved",
        "util",
    ]
    .map(String::from)
    .to_vec();
    header.extend(ns.iter().map(|n| format!("staff_n{n}")));
    header.extend(["mu_per_hour", "mark_mean"].map(String::from));
    let body = rows
        .iter()
        .map(|r| {
            let mut cells = vec![
                r.label.clone(),
                num(r.lambda_per_hour),
                r.criterion.name().to_string(),
                num(r.epsilon),
                num(r.c),
                opt(r.achieved),
                num(r.utilization),
            ];
            cells.extend(staff_cells(&ns, &r.staff));
            cells.extend([num(r.mu_per_hour), num(r.mark_mean)]);
            cells
        })
        .collect();
    Table { header, rows: body }
}

/// Columns: `c, lambda_per_hour, p0, p1, blocking, upper_bound, util,
/// mu_per_hour, mark_mean`.
pub fn exceedance_table(rows: &[ExceedanceRow]) -> Table {
    let header = [
        "c",
        "lambda_per_hour",
        "p0",
        "p1",
        "blocking",
        "upper_bound",
        "util",
        "mu_per_hour",
        "mark_mean",
    ]
    .map(String::from)
    .to_vec();
    let body = rows
        .iter()
        .map(|r| {
            [
                r.c,
                r.lambda_per_hour,
                r.p0,
                r.p1,
                r.blocking,
                r.upper_bound,
                r.utilization,
                r.mu_per_hour,
                r.mark_mean,
            ]
            .map(num)
            .to_vec()
        })
        .collect();
    Table { header, rows: body }
}

/// Columns: `fleet_vehicles, lambda_per_hour, c, util, staff_n<k>…,
/// one_to_one, mu_per_hour, mark_mean`.
pub fn curve_table(scenario: &Scenario, points: &[FleetPoint]) -> Table {
    let ns = n_columns(points.iter().map(|p| &p.staff));
    let mut header: Vec<String> = ["fleet_vehicles", "lambda_per_hour", "c", "util"]
        .map(String::from)
        .to_vec();
    header.extend(ns.iter().map(|n| format!("staff_n{n}")));
    header.extend(["one_to_one", "mu_per_hour", "mark_mean"].map(String::from));
    let rows = points
        .iter()
        .map(|p| {
            let mut cells = vec![
                num(p.fleet_size),
                num(p.lambda_per_hour),
                num(p.c),
                num(p.utilization),
            ];
            cells.extend(staff_cells(&ns, &p.staff));
            cells.extend([
                num(p.one_to_one),
                num(scenario.mu_per_hour),
                num(scenario.mark.mean()),
            ]);
            cells
        })
        .collect();
    Table { header, rows }
}

/// Columns: `hour, miles, lambda_per_hour, c, util, staff_n<k>…,
/// mu_per_hour, mark_mean`.
pub fn profile_table(scenario: &Scenario, hours: &[HourRow]) -> Table {
    let ns = n_columns(hours.iter().map(|h| &h.staff));
    let mut header: Vec<String> = ["hour", "miles", "lambda_per_hour", "c", "util"]
        .map(String::from)
        .to_vec();
    header.extend(ns.iter().map(|n| format!("staff_n{n}")));
    header.extend(["mu_per_hour", "mark_mean"].map(String::from));
    let rows = hours
        .iter()
        .map(|h| {
            let mut cells = vec![
                h.hour.to_string(),
                num(h.miles),
                num(h.lambda_per_hour),
                num(h.c),
                num(h.utilization),
            ];
            cells.extend(staff_cells(&ns, &h.staff));
            cells.extend([num(scenario.mu_per_hour), num(scenario.mark.mean())]);
            cells
        })
        .collect();
    Table { header, rows }
}

/// Re-parses an emitted table and recomputes every utilization column from
/// `λ`, `μ`, `E[M]` and `c`, and every staff count from its ratio. Returns
/// the number of rows checked.
pub fn verify_table(text: &str) -> Result<usize, ScenarioError> {
    let t = Table::parse_csv(text)?;
    let col = |name: &str| {
        t.column(name)
            .ok_or_else(|| ScenarioError::Data(format!("missing column `{name}`")))
    };
    let (lam, mu, mean) = (
        col("lambda_per_hour")?,
        col("mu_per_hour")?,
        col("mark_mean")?,
    );
    let pairs: Vec<(usize, usize, &str)> =
        [("c", "util"), ("c_p0", "util_p0"), ("c_p1", "util_p1")]
            .into_iter()
            .filter_map(|(c, u)| Some((t.column(c)?, t.column(u)?, u)))
            .collect();
    if pairs.is_empty() {
        return Err(ScenarioError::Data("no ratio/utilization columns".into()));
    }
    let staff_cols: Vec<(usize, u64)> = t
        .header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| Some((i, h.strip_prefix("staff_n")?.parse().ok()?)))
        .collect();
    for (i, row) in t.rows.iter().enumerate() {
        let cell = |j: usize| -> Result<f64, ScenarioError> {
            row[j].parse().map_err(|_| {
                ScenarioError::Data(format!("row {}: `{}` is not a number", i + 1, row[j]))
            })
        };
        let (l, m, e) = (cell(lam)?, cell(mu)?, cell(mean)?);
        for &(c, u, name) in &pairs {
            let recomputed = utilization(l, m, e, cell(c)?);
            let stored = cell(u)?;
            if (recomputed - stored).abs() > VERIFY_TOL {
                return Err(ScenarioError::Verify {
                    row: i + 1,
                    column: name.into(),
                    stored,
                    recomputed,
                });
            }
        }
        let staff_ratio = match t.column("staff_criterion") {
            Some(j) => match Criterion::parse(&row[j]) {
                Some(Criterion::P0) => Some(cell(col("c_p0")?)?),
                Some(Criterion::P1) => Some(cell(col("c_p1")?)?),
                _ => None,
            },
            None => t.column("c").map(cell).transpose()?,
        };
        if let Some(c) = staff_ratio {
            for &(j, n) in &staff_cols {
                if row[j].is_empty() {
                    continue;
                }
                let stored = cell(j)?;
                let recomputed = staff_count(c, n) as f64;
                if stored != recomputed {
                    return Err(ScenarioError::Verify {
                        row: i + 1,
                        column: t.header[j].clone(),
                        stored,
                        recomputed,
                    });
                }
            }
        }
    }
    Ok(t.rows.len())
}

/// Ordered `key = value` record of a run's inputs; no clocks or paths that
/// vary between identical runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("ratio_tol", RATIO_TOL);
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn scenario(&mut self, s: &Scenario) {
        let p = format!("scenario.{}", s.name);
        self.push(format!("{p}.label"), &s.label);
        match &s.demand {
            Demand::Rate { lambda_per_hour } => {
                self.push(format!("{p}.lambda_per_hour"), lambda_per_hour)
            }
            Demand::AnnualMiles {
                annual_miles_millions,
                days_per_year,
                peak_hour_fraction,
            } => {
                self.push(format!("{p}.annual_miles_millions"), annual_miles_millions);
                self.push(format!("{p}.days_per_year"), days_per_year);
                self.push(format!("{p}.peak_hour_fraction"), peak_hour_fraction);
            }
            Demand::HourlyMiles { miles } => {
                let list: Vec<String> = miles.iter().map(|x| num(*x)).collect();
                self.push(format!("{p}.hourly_miles"), list.join(","));
            }
            Demand::Fleet {
                fleet_sizes,
                miles_per_vehicle_per_year,
                days_per_year,
                shift_fraction,
                shift_hours,
            } => {
                let list: Vec<String> = fleet_sizes.iter().map(|x| num(*x)).collect();
                self.push(format!("{p}.fleet_sizes_vehicles"), list.join(","));
                self.push(
                    format!("{p}.miles_per_vehicle_per_year"),
                    miles_per_vehicle_per_year,
                );
                self.push(format!("{p}.days_per_year"), days_per_year);
                self.push(format!("{p}.shift_fraction"), shift_fraction);
                self.push(format!("{p}.shift_hours"), shift_hours);
            }
        }
        if let Some(mpd) = s.miles_per_disengagement {
            self.push(format!("{p}.miles_per_disengagement"), mpd);
        }
        self.push(format!("{p}.mu_per_hour"), s.mu_per_hour);
        self.push(format!("{p}.mark"), format_mark(&s.mark));
        self.push(format!("{p}.epsilon"), s.epsilon);
        self.push(format!("{p}.criterion"), s.criterion.name());
        let ns: Vec<String> = s.n_list.iter().map(u64::to_string).collect();
        self.push(format!("{p}.n_list"), ns.join(","));
    }

    pub fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("entries are UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::super::{load_scenarios, run_table, Sensitivity};
    use super::*;

    fn row(c_p0: f64) -> ScenarioRow {
        ScenarioRow {
            label: "A, B".into(),
            lambda_per_hour: 120.0,
            mu_per_hour: 60.0,
            mark_mean: 1.0,
            days_per_year: Some(360.0),
            c_p0,
            c_p1: c_p0 + 1.0,
            util_p0: utilization(120.0, 60.0, 1.0, c_p0),
            util_p1: utilization(120.0, 60.0, 1.0, c_p0 + 1.0),
            staff_criterion: Criterion::P0,
            staff: vec![(100, staff_count(c_p0, 100)), (250, staff_count(c_p0, 250))],
            sensitivity: Some(Sensitivity {
                days_per_year: 365.0,
                lambda_per_hour: 118.0,
                c_p0: 3.0,
                c_p1: 4.0,
            }),
        }
    }

    #[test]
    fn header_order_is_stable() {
        let t = rows_table(&[row(3.1)]);
        assert_eq!(
            t.header[..8],
            [
                "label",
                "lambda_per_hour",
                "c_p0",
                "c_p1",
                "util_p0",
                "util_p1",
                "staff_n100",
                "staff_n250"
            ]
        );
        let text = t.to_csv_string();
        assert!(text.starts_with("label,lambda_per_hour,c_p0,c_p1,util_p0,util_p1,staff_n100"));
        assert!(text.contains("\"A, B\",120,3.1,4.1,"));
        assert_eq!(Table::parse_csv(&text).unwrap(), t);
    }

    #[test]
    fn verification_catches_tampering() {
        let text = rows_table(&[row(3.1), row(2.7)]).to_csv_string();
        assert_eq!(verify_table(&text).unwrap(), 2);
        let tampered = text.replacen(",3.1,", ",3.2,", 1);
        assert!(matches!(
            verify_table(&tampered),
            Err(ScenarioError::Verify { row: 1, .. })
        ));
        let t = Table::parse_csv(&text).unwrap();
        let mut bad = t.clone();
        bad.rows[1][6] = "1".into();
        assert!(matches!(
            verify_table(&bad.to_csv_string()),
            Err(ScenarioError::Verify { row: 2, .. })
        ));
    }

    #[test]
    fn emitted_files_are_deterministic_and_reverify() {
        let cfg = "[system]\nmu_per_hour = 2\nepsilon = 0.01\nn_list = 10\n[scenario.a]\nlambda_per_hour = 3\nmark = exp:1\n[scenario.b]\nlambda_per_hour = 1\n";
        let scenarios = load_scenarios(cfg).unwrap();
        let a = rows_table(&run_table(&scenarios).unwrap()).to_csv_string();
        let b = rows_table(&run_table(&scenarios).unwrap()).to_csv_string();
        assert_eq!(a, b);
        assert_eq!(verify_table(&a).unwrap(), 2);
        let mut m1 = Manifest::new("table");
        let mut m2 = Manifest::new("table");
        for s in &scenarios {
            m1.scenario(s);
            m2.scenario(s);
        }
        assert_eq!(m1.to_text(), m2.to_text());
        assert!(m1.to_text().contains("scenario.a.mark = exp:1\n"));
    }
}

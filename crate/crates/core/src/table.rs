//! An `n × p` table of modal values, stored lowered and column-major.

use crate::error::{Error, Result};
use crate::modal::ModalValue;
use crate::quantile::QuantileFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionalTable {
    variable_names: Vec<String>,
    ids: Vec<String>,
    // columns[j][i] is individual i on variable j
    columns: Vec<Vec<QuantileFunction>>,
}

impl DistributionalTable {
    /// Builds a table from row-major quantile functions.
    pub fn new(
        variable_names: Vec<String>,
        ids: Vec<String>,
        rows: Vec<Vec<QuantileFunction>>,
    ) -> Result<Self> {
        let p = variable_names.len();
        if p == 0 {
            return Err(Error::Shape("table needs at least one variable".into()));
        }
        if rows.is_empty() {
            return Err(Error::Shape("table needs at least one individual".into()));
        }
        if ids.len() != rows.len() {
            return Err(Error::Shape(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        let mut columns: Vec<Vec<QuantileFunction>> =
            (0..p).map(|_| Vec::with_capacity(rows.len())).collect();
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != p {
                return Err(Error::Shape(format!(
                    "row `{}` has {} values, expected {p}",
                    ids[i],
                    row.len()
                )));
            }
            for (col, qf) in columns.iter_mut().zip(row) {
                col.push(qf);
            }
        }
        Ok(DistributionalTable {
            variable_names,
            ids,
            columns,
        })
    }

    /// Lowers row-major modal values with the given parametric resolution.
    pub fn from_modal(
        variable_names: Vec<String>,
        ids: Vec<String>,
        rows: &[Vec<ModalValue>],
        resolution: usize,
    ) -> Result<Self> {
        let lowered = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| v.lower(resolution))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(variable_names, ids, lowered)
    }

    /// Single-variable table, mostly for tests and examples.
    pub fn from_column(name: &str, column: Vec<QuantileFunction>) -> Result<Self> {
        let ids = (0..column.len()).map(|i| format!("i{i}")).collect();
        Self::new(
            vec![name.to_string()],
            ids,
            column.into_iter().map(|q| vec![q]).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn p(&self) -> usize {
        self.variable_names.len()
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn column(&self, j: usize) -> &[QuantileFunction] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<QuantileFunction>] {
        &self.columns
    }

    pub fn cell(&self, i: usize, j: usize) -> &QuantileFunction {
        &self.columns[j][i]
    }

    /// The `p` components of individual `i`.
    pub fn row(&self, i: usize) -> Vec<&QuantileFunction> {
        self.columns.iter().map(|c| &c[i]).collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variable_names.iter().position(|v| v == name)
    }

    pub fn id_index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|v| v == id)
    }

    /// Same shape, columns replaced.
    pub(crate) fn with_columns(&self, columns: Vec<Vec<QuantileFunction>>) -> Self {
        debug_assert_eq!(columns.len(), self.p());
        DistributionalTable {
            variable_names: self.variable_names.clone(),
            ids: self.ids.clone(),
            columns,
        }
    }
}

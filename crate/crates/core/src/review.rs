//! Review log ingestion and indexing.
//!
//! A review is a `(user, product, category, rating, timestamp)` tuple. The
//! [`Dataset`] interns ids, groups reviews per `(user, product)` pair (a user
//! may review the same product several times), builds the product inverted
//! index, and caches the per-group and per-category means that every pairwise
//! proximity reads.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One review: the raw unit of input.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewRecord {
    pub user_id: String,
    pub product_id: String,
    pub category_id: String,
    pub rating: f64,
    /// Seconds since epoch; never negative.
    pub timestamp: i64,
}

/// Input columns, in the order they appear in the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    User,
    Product,
    Category,
    Rating,
    Timestamp,
}

impl std::str::FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "user" | "user_id" => Ok(Column::User),
            "product" | "product_id" => Ok(Column::Product),
            "category" | "category_id" => Ok(Column::Category),
            "rating" => Ok(Column::Rating),
            "timestamp" | "time" => Ok(Column::Timestamp),
            other => Err(format!("unknown column name {other:?}")),
        }
    }
}

/// File schema: delimiter, column order, and the declared rating scale.
#[derive(Debug, Clone)]
pub struct Schema {
    pub delimiter: char,
    pub columns: [Column; 5],
    pub rating_min: f64,
    pub rating_max: f64,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            delimiter: ',',
            columns: [
                Column::User,
                Column::Product,
                Column::Category,
                Column::Rating,
                Column::Timestamp,
            ],
            rating_min: 1.0,
            rating_max: 5.0,
        }
    }
}

impl Schema {
    /// Parse a column-order string such as `user,product,category,rating,timestamp`.
    pub fn with_columns(mut self, spec: &str) -> Result<Self> {
        let cols: Vec<Column> = spec
            .split(',')
            .map(|c| c.parse().map_err(Error::Config))
            .collect::<Result<_>>()?;
        let arr: [Column; 5] = cols
            .try_into()
            .map_err(|_| Error::Config(format!("column order {spec:?} must name 5 columns")))?;
        for col in [
            Column::User,
            Column::Product,
            Column::Category,
            Column::Rating,
            Column::Timestamp,
        ] {
            if !arr.contains(&col) {
                return Err(Error::Config(format!(
                    "column order {spec:?} is missing {col:?}"
                )));
            }
        }
        self.columns = arr;
        Ok(self)
    }

    pub fn header_line(&self) -> String {
        self.columns
            .iter()
            .map(|c| match c {
                Column::User => "user_id",
                Column::Product => "product_id",
                Column::Category => "category_id",
                Column::Rating => "rating",
                Column::Timestamp => "timestamp",
            })
            .collect::<Vec<_>>()
            .join(&self.delimiter.to_string())
    }
}

/// All reviews of one user on one product.
#[derive(Debug, Clone)]
pub(crate) struct ReviewGroup {
    pub user: u32,
    pub product: u32,
    pub ratings: Vec<f64>,
    pub timestamps: Vec<i64>,
    pub mean_rating: f64,
    pub mean_time: f64,
}

/// Per-user aggregate over one category: means of the per-product means.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CategoryStats {
    pub category: u32,
    pub mean_rating: f64,
    pub mean_time: f64,
}

/// Immutable, fully indexed review log.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<ReviewRecord>,
    users: Vec<String>,
    products: Vec<String>,
    categories: Vec<String>,
    user_ids: HashMap<String, u32>,
    product_ids: HashMap<String, u32>,
    category_ids: HashMap<String, u32>,
    /// Category of each product (one category per product).
    product_category: Vec<u32>,
    groups: Vec<ReviewGroup>,
    /// Per user: `(product, group index)`, sorted by product index.
    user_groups: Vec<Vec<(u32, u32)>>,
    /// Per product: distinct reviewer indices, sorted.
    product_reviewers: Vec<Vec<u32>>,
    /// Per user: category aggregates, sorted by category index.
    user_categories: Vec<Vec<CategoryStats>>,
    time_span: (i64, i64),
    rating_min: f64,
    rating_max: f64,
}

impl Dataset {
    /// Load a delimiter-separated review file. The first line is a header and
    /// is skipped; reported line numbers count it.
    pub fn load(path: &Path, schema: &Schema) -> Result<Self> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            records.push(parse_row(line, schema, &origin, idx + 1)?);
        }
        Self::from_records(records, schema.rating_min, schema.rating_max, &origin)
    }

    /// Build a dataset from in-memory records, validating the same invariants
    /// as the file loader.
    pub fn from_records(
        records: Vec<ReviewRecord>,
        rating_min: f64,
        rating_max: f64,
        origin: &str,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset {
                path: origin.to_string(),
            });
        }

        let mut users = Vec::new();
        let mut products = Vec::new();
        let mut categories = Vec::new();
        let mut user_ids = HashMap::new();
        let mut product_ids = HashMap::new();
        let mut category_ids = HashMap::new();
        let mut product_category: Vec<u32> = Vec::new();
        let mut group_ids: HashMap<(u32, u32), u32> = HashMap::new();
        let mut groups: Vec<ReviewGroup> = Vec::new();
        let mut t_min = i64::MAX;
        let mut t_max = i64::MIN;

        for rec in &records {
            validate_record(rec, rating_min, rating_max)?;
            let u = intern(&mut users, &mut user_ids, &rec.user_id);
            let p = intern(&mut products, &mut product_ids, &rec.product_id);
            let c = intern(&mut categories, &mut category_ids, &rec.category_id);
            if p as usize == product_category.len() {
                product_category.push(c);
            } else if product_category[p as usize] != c {
                return Err(Error::Config(format!(
                    "product {} appears with two categories ({} and {})",
                    rec.product_id,
                    categories[product_category[p as usize] as usize],
                    rec.category_id
                )));
            }
            let gid = *group_ids.entry((u, p)).or_insert_with(|| {
                groups.push(ReviewGroup {
                    user: u,
                    product: p,
                    ratings: Vec::new(),
                    timestamps: Vec::new(),
                    mean_rating: 0.0,
                    mean_time: 0.0,
                });
                (groups.len() - 1) as u32
            });
            let g = &mut groups[gid as usize];
            g.ratings.push(rec.rating);
            g.timestamps.push(rec.timestamp);
            t_min = t_min.min(rec.timestamp);
            t_max = t_max.max(rec.timestamp);
        }

        for g in &mut groups {
            g.mean_rating = g.ratings.iter().sum::<f64>() / g.ratings.len() as f64;
            g.mean_time =
                g.timestamps.iter().map(|&t| t as f64).sum::<f64>() / g.timestamps.len() as f64;
        }

        let mut user_groups = vec![Vec::new(); users.len()];
        for (gid, g) in groups.iter().enumerate() {
            user_groups[g.user as usize].push((g.product, gid as u32));
        }
        for list in &mut user_groups {
            list.sort_unstable_by_key(|&(p, _)| p);
        }

        let mut product_reviewers = vec![Vec::new(); products.len()];
        for g in &groups {
            product_reviewers[g.product as usize].push(g.user);
        }
        for list in &mut product_reviewers {
            list.sort_unstable();
            list.dedup();
        }

        // Nested average: a user's category mean is the mean of the per-product
        // means over the products the user reviewed in that category.
        let mut user_categories = Vec::with_capacity(users.len());
        for list in &user_groups {
            let mut acc: Vec<(u32, f64, f64, u32)> = Vec::new();
            for &(p, gid) in list {
                let cat = product_category[p as usize];
                let g = &groups[gid as usize];
                match acc.iter_mut().find(|e| e.0 == cat) {
                    Some(e) => {
                        e.1 += g.mean_rating;
                        e.2 += g.mean_time;
                        e.3 += 1;
                    }
                    None => acc.push((cat, g.mean_rating, g.mean_time, 1)),
                }
            }
            acc.sort_unstable_by_key(|e| e.0);
            user_categories.push(
                acc.into_iter()
                    .map(|(category, r, t, n)| CategoryStats {
                        category,
                        mean_rating: r / n as f64,
                        mean_time: t / n as f64,
                    })
                    .collect(),
            );
        }

        Ok(Self {
            records,
            users,
            products,
            categories,
            user_ids,
            product_ids,
            category_ids,
            product_category,
            groups,
            user_groups,
            product_reviewers,
            user_categories,
            time_span: (t_min, t_max),
            rating_min,
            rating_max,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn records(&self) -> &[ReviewRecord] {
        &self.records
    }

    /// User ids in first-appearance order; this order defines every row index
    /// downstream (network rows, embedding rows).
    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_ids.get(id).map(|&u| u as usize)
    }

    pub fn product_index(&self, id: &str) -> Option<usize> {
        self.product_ids.get(id).map(|&p| p as usize)
    }

    pub fn category_index(&self, id: &str) -> Option<usize> {
        self.category_ids.get(id).map(|&c| c as usize)
    }

    /// `[t_min, t_max]` over all timestamps.
    pub fn time_span(&self) -> (i64, i64) {
        self.time_span
    }

    /// Length of the observed time span in seconds.
    pub fn span_seconds(&self) -> i64 {
        self.time_span.1 - self.time_span.0
    }

    pub fn rating_scale(&self) -> (f64, f64) {
        (self.rating_min, self.rating_max)
    }

    /// Mean rating of one user's reviews of one product.
    pub fn mean_rating(&self, user: &str, product: &str) -> Result<f64> {
        self.group(user, product).map(|g| g.mean_rating)
    }

    /// Mean timestamp of one user's reviews of one product.
    pub fn mean_time(&self, user: &str, product: &str) -> Result<f64> {
        self.group(user, product).map(|g| g.mean_time)
    }

    /// Mean over the user's products in `category` of the per-product mean
    /// ratings.
    pub fn category_mean_rating(&self, user: &str, category: &str) -> Result<f64> {
        self.category_stats(user, category).map(|s| s.mean_rating)
    }

    /// Symmetric to [`Self::category_mean_rating`], over timestamps.
    pub fn category_mean_time(&self, user: &str, category: &str) -> Result<f64> {
        self.category_stats(user, category).map(|s| s.mean_time)
    }

    fn group(&self, user: &str, product: &str) -> Result<&ReviewGroup> {
        let u = self
            .user_ids
            .get(user)
            .ok_or_else(|| Error::NotFound(format!("user {user}")))?;
        let p = self
            .product_ids
            .get(product)
            .ok_or_else(|| Error::NotFound(format!("product {product}")))?;
        let list = &self.user_groups[*u as usize];
        let pos = list
            .binary_search_by_key(p, |&(prod, _)| prod)
            .map_err(|_| Error::NotFound(format!("user {user} never reviewed product {product}")))?;
        Ok(&self.groups[list[pos].1 as usize])
    }

    fn category_stats(&self, user: &str, category: &str) -> Result<&CategoryStats> {
        let u = self
            .user_ids
            .get(user)
            .ok_or_else(|| Error::NotFound(format!("user {user}")))?;
        let c = self
            .category_ids
            .get(category)
            .ok_or_else(|| Error::NotFound(format!("category {category}")))?;
        let list = &self.user_categories[*u as usize];
        let pos = list
            .binary_search_by_key(c, |s| s.category)
            .map_err(|_| {
                Error::NotFound(format!("user {user} never reviewed category {category}"))
            })?;
        Ok(&list[pos])
    }

    // Index-based accessors for the pairwise feature loops.

    pub(crate) fn user_group_list(&self, user: usize) -> &[(u32, u32)] {
        &self.user_groups[user]
    }

    pub(crate) fn group_by_id(&self, gid: u32) -> &ReviewGroup {
        &self.groups[gid as usize]
    }

    pub(crate) fn user_category_list(&self, user: usize) -> &[CategoryStats] {
        &self.user_categories[user]
    }

    pub(crate) fn reviewers_of(&self, product: usize) -> &[u32] {
        &self.product_reviewers[product]
    }

    /// Number of distinct products reviewed by `user`.
    pub fn products_of(&self, user: usize) -> usize {
        self.user_groups[user].len()
    }

    /// Category index of a product.
    pub fn category_of(&self, product: usize) -> usize {
        self.product_category[product] as usize
    }

    /// Write the records back out under `schema` (header line included),
    /// in stored order.
    pub fn save_csv(&self, path: &Path, schema: &Schema) -> Result<()> {
        let mut out = String::new();
        out.push_str(&schema.header_line());
        out.push('\n');
        let d = schema.delimiter;
        for rec in &self.records {
            let mut first = true;
            for col in &schema.columns {
                if !first {
                    out.push(d);
                }
                first = false;
                match col {
                    Column::User => out.push_str(&rec.user_id),
                    Column::Product => out.push_str(&rec.product_id),
                    Column::Category => out.push_str(&rec.category_id),
                    Column::Rating => {
                        let _ = write!(out, "{}", rec.rating);
                    }
                    Column::Timestamp => {
                        let _ = write!(out, "{}", rec.timestamp);
                    }
                }
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn intern(names: &mut Vec<String>, ids: &mut HashMap<String, u32>, id: &str) -> u32 {
    match ids.get(id) {
        Some(&i) => i,
        None => {
            let i = names.len() as u32;
            names.push(id.to_string());
            ids.insert(id.to_string(), i);
            i
        }
    }
}

fn validate_record(rec: &ReviewRecord, rating_min: f64, rating_max: f64) -> Result<()> {
    let complain = |msg: String| Error::Validation {
        path: "<records>".to_string(),
        line: 0,
        msg,
    };
    if rec.user_id.is_empty() || rec.product_id.is_empty() || rec.category_id.is_empty() {
        return Err(complain("empty id field".to_string()));
    }
    if !(rating_min..=rating_max).contains(&rec.rating) {
        return Err(complain(format!(
            "rating {} outside scale [{rating_min}, {rating_max}]",
            rec.rating
        )));
    }
    if rec.timestamp < 0 {
        return Err(complain(format!("negative timestamp {}", rec.timestamp)));
    }
    Ok(())
}

fn parse_row(line: &str, schema: &Schema, origin: &str, line_no: usize) -> Result<ReviewRecord> {
    let fields: Vec<&str> = line.split(schema.delimiter).map(str::trim).collect();
    if fields.len() != 5 {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: line_no,
            msg: format!("expected 5 fields, got {}", fields.len()),
        });
    }
    let mut user = "";
    let mut product = "";
    let mut category = "";
    let mut rating = None;
    let mut timestamp = None;
    for (col, field) in schema.columns.iter().zip(&fields) {
        match col {
            Column::User => user = field,
            Column::Product => product = field,
            Column::Category => category = field,
            Column::Rating => {
                rating = Some(field.parse::<f64>().map_err(|_| Error::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    msg: format!("bad rating {field:?}"),
                })?)
            }
            Column::Timestamp => {
                timestamp = Some(field.parse::<i64>().map_err(|_| Error::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    msg: format!("bad timestamp {field:?}"),
                })?)
            }
        }
    }
    let rec = ReviewRecord {
        user_id: user.to_string(),
        product_id: product.to_string(),
        category_id: category.to_string(),
        rating: rating.expect("schema covers rating"),
        timestamp: timestamp.expect("schema covers timestamp"),
    };
    if rec.user_id.is_empty() || rec.product_id.is_empty() || rec.category_id.is_empty() {
        return Err(Error::Validation {
            path: origin.to_string(),
            line: line_no,
            msg: "empty id field".to_string(),
        });
    }
    if !(schema.rating_min..=schema.rating_max).contains(&rec.rating) {
        return Err(Error::Validation {
            path: origin.to_string(),
            line: line_no,
            msg: format!(
                "rating {} outside scale [{}, {}]",
                rec.rating, schema.rating_min, schema.rating_max
            ),
        });
    }
    if rec.timestamp < 0 {
        return Err(Error::Validation {
            path: origin.to_string(),
            line: line_no,
            msg: format!("negative timestamp {}", rec.timestamp),
        });
    }
    Ok(rec)
}

/// Partial ground truth: colluder / non-colluder labels for a subset of users.
#[derive(Debug, Clone, Default)]
pub struct LabelSet {
    labels: HashMap<String, bool>,
}

impl LabelSet {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, bool)>) -> Self {
        Self {
            labels: pairs.into_iter().collect(),
        }
    }

    /// Load a `user_id,label` file (header line skipped, label in {0,1});
    /// every labeled user must exist in `dataset`.
    pub fn load(path: &Path, dataset: &Dataset) -> Result<Self> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let mut labels = HashMap::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let (user, label) = line.split_once(',').ok_or_else(|| Error::Parse {
                path: origin.clone(),
                line: idx + 1,
                msg: format!("expected `user_id,label`, got {line:?}"),
            })?;
            let user = user.trim();
            let flag = match label.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Validation {
                        path: origin.clone(),
                        line: idx + 1,
                        msg: format!("label {other:?} not in {{0,1}}"),
                    })
                }
            };
            if dataset.user_index(user).is_none() {
                return Err(Error::Validation {
                    path: origin.clone(),
                    line: idx + 1,
                    msg: format!("labeled user {user:?} not present in dataset"),
                });
            }
            labels.insert(user.to_string(), flag);
        }
        Ok(Self { labels })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("user_id,label\n");
        let mut entries: Vec<_> = self.labels.iter().collect();
        entries.sort();
        for (user, &flag) in entries {
            let _ = writeln!(out, "{user},{}", flag as u8);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// `Some(true)` for a labeled colluder, `Some(false)` for a labeled
    /// non-colluder, `None` for an unlabeled user.
    pub fn get(&self, user: &str) -> Option<bool> {
        self.labels.get(user).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_colluders(&self) -> usize {
        self.labels.values().filter(|&&v| v).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.labels.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

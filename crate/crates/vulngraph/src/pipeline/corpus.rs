//! Synthetic Java mini-corpus for hermetic tests and demos.
//!
//! Each file holds one "core" method built around a risky idiom plus a few
//! neutral helper methods. Vulnerable and safe variants of an idiom share
//! most of their vocabulary; several differ mainly in control flow (a guard
//! branch, a `finally`, a try-with-resources). Filler statements are drawn
//! from the same distribution for both classes.
//!
//! Layout written by [`generate_corpus`]:
//!
//! ```text
//! <out>/safe/Svc0001.java
//! <out>/vulnerable/Svc0002.java
//! <out>/labels.csv          path,label (relative paths)
//! ```

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Idiom {
    SqlConcat,
    UnclosedResource,
    UnvalidatedIndex,
    PathTraversal,
    CommandExec,
}

impl Idiom {
    pub const ALL: [Idiom; 5] = [
        Idiom::SqlConcat,
        Idiom::UnclosedResource,
        Idiom::UnvalidatedIndex,
        Idiom::PathTraversal,
        Idiom::CommandExec,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// Total files; half safe, half vulnerable (odd counts favor safe).
    pub files: usize,
    pub seed: u64,
    /// Upper bound on helper methods per file.
    pub max_helpers: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            files: 400,
            seed: 0,
            max_helpers: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedFile {
    pub class_name: String,
    pub source: String,
    pub label: u8,
    pub idiom: Idiom,
}

const NOUNS: &[&str] = &[
    "user", "order", "account", "item", "record", "report", "session", "invoice", "customer",
    "product", "ticket", "profile",
];
const FIELDS: &[&str] = &[
    "name", "id", "email", "status", "owner", "region", "code", "title",
];

fn cap(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

struct Ctx<'r> {
    rng: &'r mut ChaCha8Rng,
    noun: &'static str,
    field: &'static str,
}

impl Ctx<'_> {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn filler(&mut self, indent: &str) -> String {
        let n = self.rng.random_range(0..=3);
        let mut out = String::new();
        for _ in 0..n {
            let k = self.rng.random_range(0..6);
            let v = self.rng.random_range(1..50);
            let line = match k {
                0 => format!("int count{v} = {v};"),
                1 => format!("log.fine(\"{} step {v}\");", self.noun),
                2 => format!("for (int k = 0; k < {v}; k++) {{ total += k; }}"),
                3 => format!("if (total > {v}) {{ total = total % {v}; }}"),
                4 => format!("String tag{v} = \"{}-{v}\";", self.field),
                _ => format!("metrics.increment(\"{}.calls\");", self.noun),
            };
            out.push_str(indent);
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

fn sql(c: &mut Ctx<'_>, vulnerable: bool) -> String {
    let (noun, field) = (c.noun, c.field);
    let table = format!("{noun}s");
    let pre = c.filler("        ");
    let post = c.filler("        ");
    if vulnerable {
        let guard = if c.chance(0.4) {
            format!("        if ({field} == null) {{ return null; }}\n")
        } else {
            String::new()
        };
        format!(
            "    public ResultSet find{title}(Connection conn, String {field}) throws SQLException {{
        int total = 0;
{guard}{pre}        Statement st = conn.createStatement();
        String query = \"SELECT * FROM {table} WHERE {field} = '\" + {field} + \"'\";
{post}        return st.executeQuery(query);
    }}
",
            title = cap(noun)
        )
    } else {
        let guard = if c.chance(0.4) {
            format!("        if ({field} == null) {{ return null; }}\n")
        } else {
            String::new()
        };
        format!(
            "    public ResultSet find{title}(Connection conn, String {field}) throws SQLException {{
        int total = 0;
{guard}{pre}        PreparedStatement st = conn.prepareStatement(\"SELECT * FROM {table} WHERE {field} = ?\");
        st.setString(1, {field});
{post}        return st.executeQuery();
    }}
",
            title = cap(noun)
        )
    }
}

fn resource(c: &mut Ctx<'_>, vulnerable: bool) -> String {
    let noun = c.noun;
    let pre = c.filler("        ");
    let body = c.filler("            ");
    let title = cap(noun);
    if vulnerable {
        if c.chance(0.5) {
            format!(
                "    public String read{title}(String path) throws IOException {{
        int total = 0;
{pre}        BufferedReader reader = new BufferedReader(new FileReader(path));
        String line = reader.readLine();
{body}        reader.close();
        return line;
    }}
"
            )
        } else {
            format!(
                "    public String read{title}(String path) throws IOException {{
        int total = 0;
{pre}        BufferedReader reader = new BufferedReader(new FileReader(path));
        StringBuilder sb = new StringBuilder();
        String line;
        while ((line = reader.readLine()) != null) {{
            sb.append(line);
        }}
        return sb.toString();
    }}
"
            )
        }
    } else if c.chance(0.5) {
        format!(
            "    public String read{title}(String path) throws IOException {{
        int total = 0;
{pre}        try (BufferedReader reader = new BufferedReader(new FileReader(path))) {{
            String line = reader.readLine();
{body}            return line;
        }}
    }}
"
        )
    } else {
        format!(
            "    public String read{title}(String path) throws IOException {{
        int total = 0;
{pre}        BufferedReader reader = new BufferedReader(new FileReader(path));
        try {{
            String line = reader.readLine();
{body}            return line;
        }} finally {{
            reader.close();
        }}
    }}
"
        )
    }
}

fn index(c: &mut Ctx<'_>, vulnerable: bool) -> String {
    let noun = c.noun;
    let pre = c.filler("        ");
    let title = cap(noun);
    let check = if vulnerable {
        if c.chance(0.5) {
            "        if (data == null) {\n            return -1;\n        }\n".to_string()
        } else {
            String::new()
        }
    } else if c.chance(0.5) {
        "        if (i < 0 || i >= data.length) {\n            throw new IllegalArgumentException(\"index\");\n        }\n"
            .to_string()
    } else {
        "        if (data == null || i < 0 || i >= data.length) {\n            return -1;\n        }\n".to_string()
    };
    format!(
        "    public int {noun}At(int[] data, int i) {{
        int total = 0;
{pre}{check}        total += data[i];
        return total;
    }}

    public void set{title}(int[] data, int i, int value) {{
{check2}        data[i] = value;
    }}
",
        check2 = if vulnerable {
            String::new()
        } else {
            "        if (i < 0 || i >= data.length) {\n            return;\n        }\n".to_string()
        }
    )
}

fn path(c: &mut Ctx<'_>, vulnerable: bool) -> String {
    let noun = c.noun;
    let pre = c.filler("        ");
    let title = cap(noun);
    let normalize = if vulnerable && c.chance(0.5) {
        "        Path resolved = base.resolve(name).normalize();\n"
    } else if vulnerable {
        "        Path resolved = base.resolve(name);\n"
    } else {
        "        Path resolved = base.resolve(name).normalize();\n"
    };
    let check = if vulnerable {
        String::new()
    } else {
        "        if (!resolved.startsWith(base)) {\n            throw new SecurityException(\"path escapes base\");\n        }\n"
            .to_string()
    };
    format!(
        "    public byte[] load{title}(Path base, String name) throws IOException {{
        int total = 0;
{pre}{normalize}{check}        return Files.readAllBytes(resolved);
    }}
"
    )
}

fn command(c: &mut Ctx<'_>, vulnerable: bool) -> String {
    let noun = c.noun;
    let pre = c.filler("        ");
    let title = cap(noun);
    if vulnerable {
        let weak = if c.chance(0.5) {
            "        if (tool.isEmpty()) {\n            return -1;\n        }\n"
        } else {
            ""
        };
        format!(
            "    public int run{title}(String tool, String arg) throws Exception {{
        int total = 0;
{pre}{weak}        Process p = Runtime.getRuntime().exec(\"sh -c \" + tool + \" \" + arg);
        return p.waitFor();
    }}
"
        )
    } else {
        format!(
            "    public int run{title}(String tool, String arg) throws Exception {{
        int total = 0;
{pre}        if (!ALLOWED.contains(tool)) {{
            throw new SecurityException(\"tool not allowed\");
        }}
        Process p = new ProcessBuilder(tool, arg).start();
        return p.waitFor();
    }}
"
        )
    }
}

fn helper(c: &mut Ctx<'_>, k: usize) -> String {
    let noun = c.noun;
    let field = c.field;
    let body = c.filler("        ");
    match c.rng.random_range(0..4) {
        0 => format!(
            "    public int count{k}(List<String> {noun}s) {{
        int total = 0;
{body}        for (String s : {noun}s) {{
            if (s.contains(\"{field}\")) {{
                total++;
            }}
        }}
        return total;
    }}
"
        ),
        1 => format!(
            "    private String describe{k}(String {field}) {{
        int total = 0;
{body}        if ({field} == null) {{
            return \"none\";
        }}
        return \"{noun}:\" + {field}.trim();
    }}
"
        ),
        2 => format!(
            "    public long sum{k}(int[] values) {{
        long total = 0;
        int i = 0;
        while (i < values.length) {{
            total += values[i];
            i++;
        }}
{body}        return total;
    }}
"
        ),
        _ => format!(
            "    public boolean valid{k}(String {field}) {{
        int total = 0;
{body}        switch ({field}.length()) {{
            case 0:
                return false;
            default:
                return true;
        }}
    }}
"
        ),
    }
}

/// One source file. `idx` makes the class name unique.
pub fn generate_file(
    rng: &mut ChaCha8Rng,
    idx: usize,
    vulnerable: bool,
    max_helpers: usize,
) -> GeneratedFile {
    let idiom = *Idiom::ALL.choose(rng).expect("idioms");
    let noun = *NOUNS.choose(rng).expect("nouns");
    let field = *FIELDS.choose(rng).expect("fields");
    let helpers = rng.random_range(0..=max_helpers);
    let mut c = Ctx { rng, noun, field };
    let core = match idiom {
        Idiom::SqlConcat => sql(&mut c, vulnerable),
        Idiom::UnclosedResource => resource(&mut c, vulnerable),
        Idiom::UnvalidatedIndex => index(&mut c, vulnerable),
        Idiom::PathTraversal => path(&mut c, vulnerable),
        Idiom::CommandExec => command(&mut c, vulnerable),
    };
    let core_pos = c.rng.random_range(0..=helpers);
    let mut methods: Vec<String> = (0..helpers).map(|k| helper(&mut c, k)).collect();
    methods.insert(core_pos, core);
    let class_name = format!("{}Svc{idx:04}", cap(noun));
    let source = format!(
        "package demo.{noun};

import java.io.*;
import java.nio.file.*;
import java.sql.*;
import java.util.*;
import java.util.logging.Logger;

public class {class_name} {{
    private static final Logger log = Logger.getLogger(\"{noun}\");
    private static final Set<String> ALLOWED = new HashSet<>(Arrays.asList(\"ls\", \"date\"));
    private final Metrics metrics = new Metrics();
    private int total;

{}}}
",
        methods.join("\n")
    );
    GeneratedFile {
        class_name,
        source,
        label: u8::from(vulnerable),
        idiom,
    }
}

/// All files for `cfg`, alternating safe and vulnerable.
pub fn generate_files(cfg: &CorpusConfig) -> Vec<GeneratedFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.files)
        .map(|i| generate_file(&mut rng, i, i % 2 == 1, cfg.max_helpers))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub safe: usize,
    pub vulnerable: usize,
}

pub fn generate_corpus(out: &Path, cfg: &CorpusConfig) -> Result<CorpusSummary> {
    let files = generate_files(cfg);
    let mut labels = String::from("path,label\n");
    let mut summary = CorpusSummary {
        safe: 0,
        vulnerable: 0,
    };
    for f in &files {
        let dir = if f.label == 1 { "vulnerable" } else { "safe" };
        let d = out.join(dir);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        let p = d.join(format!("{}.java", f.class_name));
        std::fs::write(&p, &f.source).map_err(|e| Error::io(&p, e))?;
        labels.push_str(&format!("{dir}/{}.java,{}\n", f.class_name, f.label));
        if f.label == 1 {
            summary.vulnerable += 1;
        } else {
            summary.safe += 1;
        }
    }
    let lp = out.join("labels.csv");
    std::fs::write(&lp, labels).map_err(|e| Error::io(&lp, e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::{parse_and_build, SourceUnit};

    #[test]
    fn every_generated_file_parses() {
        let files = generate_files(&CorpusConfig {
            files: 120,
            seed: 3,
            max_helpers: 3,
        });
        for f in &files {
            let unit = SourceUnit::new(format!("{}.java", f.class_name), f.source.clone()).unwrap();
            let gs = parse_and_build(&unit).unwrap_or_else(|e| panic!("{e}\n{}", f.source));
            assert!(!gs.is_empty());
        }
    }

    #[test]
    fn balanced_and_deterministic() {
        let cfg = CorpusConfig {
            files: 10,
            ..Default::default()
        };
        let a = generate_files(&cfg);
        assert_eq!(a, generate_files(&cfg));
        assert_eq!(a.iter().filter(|f| f.label == 1).count(), 5);
    }
}

//! Built-in jobs reproducing the worked examples.

use crate::config::{ConfigError, Job, JobConfig};

pub struct Entry {
    pub name: &'static str,
    pub config: &'static str,
}

pub const ENTRIES: &[Entry] = &[
    Entry {
        name: "example1-cone",
        config: include_str!("../corpus/example1-cone.json"),
    },
    Entry {
        name: "example2-cylinder",
        config: include_str!("../corpus/example2-cylinder.json"),
    },
    Entry {
        name: "example3-four-web",
        config: include_str!("../corpus/example3-four-web.json"),
    },
    Entry {
        name: "constant-curvature-lines",
        config: include_str!("../corpus/constant-curvature-lines.json"),
    },
    Entry {
        name: "paraboloid-meridians",
        config: include_str!("../corpus/paraboloid-meridians.json"),
    },
    Entry {
        name: "euler-roundtrip",
        config: include_str!("../corpus/euler-roundtrip.json"),
    },
];

pub fn find(name: &str) -> Option<&'static Entry> {
    ENTRIES.iter().find(|e| e.name == name)
}

impl Entry {
    pub fn description(&self) -> String {
        JobConfig::from_json(self.config)
            .ok()
            .and_then(|c| c.description)
            .unwrap_or_default()
    }

    pub fn job(&self) -> Result<Job, ConfigError> {
        Job::from_json(self.config)
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown technology `{0}`")]
    UnknownTechnology(String),
    #[error("unknown policy implementation `{0}`")]
    UnknownPi(String),
    #[error("selector schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("unknown selector field `{0}`")]
    UnknownField(String),
    #[error("no route from `{from}` to `{to}`")]
    Unroutable { from: String, to: String },
    #[error("entity `{0}` has no resolvable address")]
    NoAddress(String),
    #[error("invalid value `{value}` for {what}")]
    BadValue { what: &'static str, value: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("mapping error: {0}")]
    Mapping(String),
    #[error("unmapped cipher `{0}`")]
    UnmappedCipher(String),
    #[error("cannot render {0} anomalies")]
    Unrenderable(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("unknown report format `{0}`")]
    UnknownFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

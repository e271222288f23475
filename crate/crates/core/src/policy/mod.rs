pub mod coefficients;
pub mod fieldset;
pub mod pi;
pub mod selector;
pub mod technology;

pub use coefficients::Coefficients;
pub use fieldset::{FieldKind, FieldSet};
pub use pi::Pi;
pub use selector::Selector;
pub use technology::{TechId, TechRegistry};

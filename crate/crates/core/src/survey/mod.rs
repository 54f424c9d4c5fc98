//! Survey schemas, response files and the latent layout they induce.

mod layout;
mod responses;
mod schema;

pub use layout::LatentLayout;
pub use responses::{load_responses, read_responses, write_responses, ResponseMatrix};
pub use schema::{parse_schema, ItemKind, ItemSpec, SurveySchema};

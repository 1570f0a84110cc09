use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolParam {
    pub name: String,
    #[serde(default)]
    pub required: bool,
}

impl ToolParam {
    pub fn required(name: &str) -> Self {
        ToolParam {
            name: name.to_string(),
            required: true,
        }
    }

    pub fn optional(name: &str) -> Self {
        ToolParam {
            name: name.to_string(),
            required: false,
        }
    }
}

/// One tool as advertised by a server. All parameters are strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub server: String,
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub input_schema: Vec<ToolParam>,
}

impl ToolSpec {
    fn new(server: &str, name: &str, description: &str, params: Vec<ToolParam>) -> Self {
        ToolSpec {
            server: server.to_string(),
            name: name.to_string(),
            description: description.to_string(),
            input_schema: params,
        }
    }

    /// The parameter a plain-string agent input is bound to.
    pub fn primary_param(&self) -> Option<&ToolParam> {
        self.input_schema
            .iter()
            .find(|p| p.required)
            .or_else(|| self.input_schema.first())
    }

    /// Turns the agent's input string into call arguments. A JSON object
    /// input is passed through; anything else fills the primary parameter.
    pub fn bind_input(&self, input: &str) -> Map<String, Value> {
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(input.trim()) {
            return obj;
        }
        let mut args = Map::new();
        if let Some(p) = self.primary_param() {
            args.insert(p.name.clone(), Value::String(input.to_string()));
        }
        args
    }

    /// JSON Schema in the form tool servers advertise.
    pub fn json_schema(&self) -> Value {
        let properties: Map<String, Value> = self
            .input_schema
            .iter()
            .map(|p| (p.name.clone(), serde_json::json!({"type": "string"})))
            .collect();
        let required: Vec<&str> = self
            .input_schema
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        serde_json::json!({"type": "object", "properties": properties, "required": required})
    }

    /// Reads the parameter list back out of a JSON Schema object.
    pub fn params_from_schema(schema: &Value) -> Vec<ToolParam> {
        let required: Vec<&str> = schema
            .get("required")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        let mut params: Vec<ToolParam> = schema
            .get("properties")
            .and_then(Value::as_object)
            .map(|props| {
                props
                    .keys()
                    .map(|name| ToolParam {
                        name: name.clone(),
                        required: required.contains(&name.as_str()),
                    })
                    .collect()
            })
            .unwrap_or_default();
        // Required parameters first, each group in declaration order.
        params.sort_by_key(|p| {
            (
                !p.required,
                required
                    .iter()
                    .position(|r| *r == p.name)
                    .unwrap_or(usize::MAX),
            )
        });
        params
    }
}

/// Input rendering used for mock matching and echo: a single string
/// argument is used as-is, anything else as compact JSON.
pub fn input_key(args: &Map<String, Value>) -> String {
    if args.len() == 1 {
        if let Some(Value::String(s)) = args.values().next() {
            return s.clone();
        }
    }
    Value::Object(args.clone()).to_string()
}

pub const WIKIPEDIA: &str = "Wikipedia";
pub const GOOGLE_SEARCH: &str = "Google Search";
pub const GOOGLE_SCHOLAR: &str = "Google Scholar";
pub const PAPER_SEARCH: &str = "Paper Search";

/// The eleven-tool reference catalog across four servers.
pub fn reference_catalog() -> Vec<ToolSpec> {
    let title = || vec![ToolParam::required("title")];
    let query = || vec![ToolParam::required("query")];
    vec![
        ToolSpec::new(
            WIKIPEDIA,
            "get_article",
            "Get the full content of a Wikipedia article.",
            title(),
        ),
        ToolSpec::new(
            WIKIPEDIA,
            "get_related_topics",
            "Get topics related to a Wikipedia article.",
            title(),
        ),
        ToolSpec::new(
            WIKIPEDIA,
            "get_sections",
            "Get the sections of a Wikipedia article.",
            title(),
        ),
        ToolSpec::new(
            WIKIPEDIA,
            "get_summary",
            "Get a summary of a Wikipedia article.",
            title(),
        ),
        ToolSpec::new(
            WIKIPEDIA,
            "summarize_article_section",
            "Get a summary of a specific section of a Wikipedia article.",
            vec![
                ToolParam::required("title"),
                ToolParam::optional("section_title"),
            ],
        ),
        ToolSpec::new(
            WIKIPEDIA,
            "search_wikipedia",
            "Search Wikipedia for articles matching a query.",
            query(),
        ),
        ToolSpec::new(
            WIKIPEDIA,
            "extract_key_facts",
            "Extract key facts from a Wikipedia article.",
            title(),
        ),
        ToolSpec::new(
            GOOGLE_SEARCH,
            "search_google",
            "Retrieve Google search results for a given query.",
            query(),
        ),
        ToolSpec::new(
            GOOGLE_SCHOLAR,
            "search_google_scholar",
            "Retrieve Google Scholar search results for a given query.",
            query(),
        ),
        ToolSpec::new(
            PAPER_SEARCH,
            "search_arxiv",
            "Search academic papers from arXiv.",
            query(),
        ),
        ToolSpec::new(
            PAPER_SEARCH,
            "search_pubmed",
            "Search academic papers from PubMed.",
            query(),
        ),
    ]
}

pub fn reference_servers() -> [&'static str; 4] {
    [WIKIPEDIA, GOOGLE_SEARCH, GOOGLE_SCHOLAR, PAPER_SEARCH]
}

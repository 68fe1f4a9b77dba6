#include "llmfp/simenv.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace llmfp {

// ---------------------------------------------------------------------------
// Prompting configurations

std::string to_string(FrameworkKind k) {
    switch (k) {
        case FrameworkKind::none: return "none";
        case FrameworkKind::rag: return "rag";
        case FrameworkKind::cot: return "cot";
    }
    throw std::invalid_argument("unknown framework kind");
}

FrameworkKind framework_from_string(const std::string& s) {
    if (s == "none") return FrameworkKind::none;
    if (s == "rag") return FrameworkKind::rag;
    if (s == "cot") return FrameworkKind::cot;
    throw std::invalid_argument("unknown framework kind: " + s);
}

void PromptingConfiguration::validate() const {
    if (temperature < 0.0 || temperature > 1.0)
        throw std::invalid_argument("temperature outside [0,1]");
    if (frequency_penalty < 0.65 || frequency_penalty > 1.0)
        throw std::invalid_argument("frequency_penalty outside [0.65,1]");
    if (framework.kind == FrameworkKind::rag && framework.corpus_chunks.empty())
        throw std::invalid_argument("rag framework requires a non-empty corpus");
}

json PromptingConfiguration::to_json() const {
    json j{{"temperature", temperature},
           {"frequency_penalty", frequency_penalty},
           {"framework", json{{"kind", to_string(framework.kind)},
                              {"template_id", framework.template_id},
                              {"corpus_chunks", framework.corpus_chunks}}}};
    if (system_prompt) j["system_prompt"] = *system_prompt;
    return j;
}

PromptingConfiguration PromptingConfiguration::from_json(const json& j) {
    PromptingConfiguration c;
    c.temperature = j.at("temperature").get<double>();
    c.frequency_penalty = j.at("frequency_penalty").get<double>();
    if (j.contains("system_prompt")) c.system_prompt = j.at("system_prompt").get<std::string>();
    const json& f = j.at("framework");
    c.framework.kind = framework_from_string(f.at("kind").get<std::string>());
    c.framework.template_id = f.at("template_id").get<std::uint64_t>();
    c.framework.corpus_chunks = f.at("corpus_chunks").get<std::vector<std::string>>();
    c.validate();
    return c;
}

std::string PromptingConfiguration::digest() const { return digest_hex(to_json().dump()); }

void ConfigPool::validate() const {
    if (system_prompts.empty() || rag_templates.empty() || rag_corpus.empty() ||
        cot_templates.empty())
        throw std::invalid_argument("config pool has an empty component");
    if (framework_probability < 0.0 || framework_probability > 1.0)
        throw std::invalid_argument("framework_probability outside [0,1]");
}

json ConfigPool::to_json() const {
    return json{{"system_prompts", system_prompts},
                {"rag_templates", rag_templates},
                {"rag_corpus", rag_corpus},
                {"cot_templates", cot_templates},
                {"framework_probability", framework_probability}};
}

ConfigPool ConfigPool::from_json(const json& j) {
    ConfigPool p;
    p.system_prompts = j.at("system_prompts").get<std::vector<std::string>>();
    p.rag_templates = j.at("rag_templates").get<std::vector<std::string>>();
    p.rag_corpus = j.at("rag_corpus").get<std::vector<std::string>>();
    p.cot_templates = j.at("cot_templates").get<std::vector<std::string>>();
    p.framework_probability = j.value("framework_probability", 0.2);
    p.validate();
    return p;
}

void save_config_pool(const std::string& path, const ConfigPool& pool) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << pool.to_json().dump(1) << '\n';
}

ConfigPool load_config_pool(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open pool file " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("pool file is not valid JSON: " + path);
    return ConfigPool::from_json(j);
}

PromptingConfiguration sample_config(const ConfigPool& pool, std::uint64_t rng_seed) {
    pool.validate();
    Rng rng(rng_seed ^ 0xc0f1ull);
    PromptingConfiguration c;
    c.temperature = rng.uniform(0.0, 1.0);
    c.frequency_penalty = rng.uniform(0.65, 1.0);
    c.system_prompt = pool.system_prompts[rng.uniform_int(pool.system_prompts.size())];
    if (rng.bernoulli(pool.framework_probability)) {
        if (rng.bernoulli(0.5)) {
            c.framework.kind = FrameworkKind::rag;
            const std::string& tpl = pool.rag_templates[rng.uniform_int(pool.rag_templates.size())];
            c.framework.template_id = fnv1a64(tpl);
            // up to three distinct chunks
            std::vector<std::size_t> idx(pool.rag_corpus.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            rng.shuffle(idx);
            const std::size_t n = std::min<std::size_t>(3, idx.size());
            for (std::size_t i = 0; i < n; ++i)
                c.framework.corpus_chunks.push_back(pool.rag_corpus[idx[i]]);
        } else {
            c.framework.kind = FrameworkKind::cot;
            const std::string& tpl = pool.cot_templates[rng.uniform_int(pool.cot_templates.size())];
            c.framework.template_id = fnv1a64(tpl);
        }
    }
    return c;
}

std::pair<ConfigPool, ConfigPool> split_pools(const ConfigPool& pool, std::uint64_t rng_seed) {
    pool.validate();
    auto split_one = [](std::vector<std::string> v, Rng& rng, std::vector<std::string>& a,
                        std::vector<std::string>& b) {
        if (v.size() < 2)
            throw std::invalid_argument("cannot split a pool component with fewer than 2 entries");
        rng.shuffle(v);
        const std::size_t half = (v.size() + 1) / 2;
        a.assign(v.begin(), v.begin() + static_cast<long>(half));
        b.assign(v.begin() + static_cast<long>(half), v.end());
    };
    Rng rng(rng_seed ^ 0x5e117ull);
    ConfigPool train, test;
    split_one(pool.system_prompts, rng, train.system_prompts, test.system_prompts);
    split_one(pool.rag_templates, rng, train.rag_templates, test.rag_templates);
    split_one(pool.rag_corpus, rng, train.rag_corpus, test.rag_corpus);
    split_one(pool.cot_templates, rng, train.cot_templates, test.cot_templates);
    train.framework_probability = test.framework_probability = pool.framework_probability;
    return {train, test};
}

// ---------------------------------------------------------------------------
// Bundled pool data

namespace {

const std::vector<std::string>& bundled_system_prompts() {
    static const std::vector<std::string> prompts = {
        "You are a financial advisor bot for a banking website. Assist users in understanding "
        "different banking products and services like savings accounts, loans, and investment "
        "options. Offer guidance on financial planning, budgeting, and saving strategies. Keep "
        "user information confidential and provide trustworthy advice.",
        "Help library visitors explore book catalogs, reserve materials, and access digital "
        "resources. Provide reading recommendations and information on library events. Answer "
        "inquiries with politeness and direct users to additional resources or library staff "
        "when needed.",
        "Provide general legal information in areas such as family law, business contracts, and "
        "civil rights. Clarify legal terms and procedures, and guide users on when and how to "
        "seek professional legal advice. Maintain a formal tone and ensure privacy and "
        "discretion in all interactions.",
        "You are ProjectManagerGPT, an AI expert in the field of project management, with a deep "
        "understanding of various methodologies, team dynamics, and stakeholder management. Your "
        "expertise enables you to navigate complex project landscapes, identifying and resolving "
        "potential issues before they escalate, and ensuring the successful delivery of projects "
        "on time and within budget.",
        "I want you to act as a growth hacker. You will create innovative strategies to promote "
        "a startup product or service of your choice. You will identify a target audience, "
        "develop key growth tactics and experiments, select the most effective digital channels "
        "for promotion, and determine any additional resources needed to optimize growth.",
        "You are StartupGPT, an AI expert in the world of entrepreneurship, with a keen "
        "understanding of the unique challenges faced by indie founders, particularly "
        "programmers and software engineers. Your expertise lies in developing efficient "
        "strategies for launching lean startups that can generate revenue quickly, without "
        "relying on gimmicks or unsustainable practices.",
        "Serve as a customer service chatbot for an online store. Assist users with product "
        "inquiries, order tracking, returns, and refunds. Provide prompt and courteous support, "
        "ensuring a positive shopping experience.",
        "Act as a relationship advice bot. Offer guidance on communication, conflict resolution, "
        "and building healthy relationships. Provide support and resources for individuals and "
        "couples.",
        "You are TravelMate, a travel planning assistant. Build itineraries, compare transport "
        "options, and surface visa and vaccination requirements. Always confirm dates and budget "
        "before recommending bookings, and never store passport numbers.",
        "Act as a sous-chef assistant for a recipe website. Suggest dishes based on available "
        "ingredients, adapt recipes for dietary restrictions, and explain techniques in plain "
        "language. Prefer metric units and include approximate preparation times.",
        "You are CoachFlex, a personal fitness companion. Design workout plans around the "
        "user's equipment and schedule, track weekly progress, and encourage rest days. Do not "
        "give medical advice; refer users to professionals for injuries.",
        "Serve as a homework helper for secondary-school students. Explain concepts step by "
        "step instead of giving bare answers, cite the relevant rule or formula, and keep an "
        "encouraging tone. Flag questions that look like exam material.",
        "You are the IT helpdesk assistant for a mid-sized company. Triage hardware, software, "
        "and network issues, walk users through standard fixes, and open a ticket when a "
        "problem needs escalation. Never ask for passwords in plain text.",
        "Act as a museum guide for a natural history collection. Describe exhibits vividly, "
        "adapt explanations for children and adults, and suggest themed routes through the "
        "galleries based on the visitor's interests and available time.",
        "You are GreenThumb, a gardening advisor. Recommend plants suited to the user's climate "
        "zone, diagnose common pests and diseases from descriptions, and propose seasonal care "
        "schedules. Favour organic treatments when they are effective.",
        "Serve as a real-estate assistant for a property listings portal. Help visitors compare "
        "neighbourhoods, estimate running costs, and prepare questions for viewings. Be "
        "transparent about fees and never pressure users toward a purchase.",
    };
    return prompts;
}

const std::vector<std::string>& bundled_rag_templates() {
    static const std::vector<std::string> templates = {
        "Context information is below.\n---------------------\n{context}\n"
        "---------------------\nGiven the context information and not prior knowledge, "
        "answer the query.\nQuery: {query}\nAnswer:",
        "You are given the following reference passages:\n{context}\nUsing only these "
        "passages, respond to the question.\nQuestion: {query}",
        "Knowledge base excerpts:\n{context}\nAnswer the user strictly from the excerpts "
        "above. If the answer is not present, say so.\nUser: {query}",
        "[BEGIN CONTEXT]\n{context}\n[END CONTEXT]\nAnswer based on the context only.\n{query}",
        "Documents:\n{context}\n---\nTask: answer the query below using the documents.\n"
        "Query: {query}",
        "Read the following material and answer afterwards.\nMaterial:\n{context}\n"
        "Question: {query}\nReply concisely.",
    };
    return templates;
}

const std::vector<std::string>& bundled_cot_templates() {
    static const std::vector<std::string> templates = {
        "Think through the problem step by step before giving the final answer.\n{query}",
        "{query}\nLet's reason about this carefully, one step at a time.",
    };
    return templates;
}

// 30 short reference chunks standing in for a retrieval corpus.
const std::vector<std::string>& bundled_corpus() {
    static const std::vector<std::string> chunks = {
        "The Great Barrier Reef stretches over 2,300 kilometres off the coast of Queensland and "
        "is composed of nearly three thousand individual reef systems. It supports an enormous "
        "diversity of marine life, including more than 1,500 species of fish.",
        "Photosynthesis converts carbon dioxide and water into glucose and oxygen using light "
        "energy absorbed by chlorophyll. The light-dependent reactions occur in the thylakoid "
        "membranes, while the Calvin cycle runs in the stroma of the chloroplast.",
        "The printing press with movable type, introduced in Europe around 1440, dramatically "
        "reduced the cost of producing books. Within fifty years, presses operated in more than "
        "two hundred cities across the continent.",
        "A binary search algorithm repeatedly halves a sorted array to locate a target value, "
        "giving a worst-case running time logarithmic in the array length. It requires random "
        "access and fails on unsorted input.",
        "Mount Kilimanjaro is the highest free-standing mountain in the world, rising about "
        "4,900 metres from its base to a summit of 5,895 metres above sea level. Its three "
        "volcanic cones are Kibo, Mawenzi, and Shira.",
        "The Baroque period in European music, roughly 1600 to 1750, emphasized contrast, "
        "ornamentation, and the basso continuo. Composers of the era include Bach, Handel, "
        "Vivaldi, and Monteverdi.",
        "Plate tectonics describes the slow movement of large slabs of the Earth's lithosphere "
        "over the asthenosphere. Earthquakes and volcanic activity concentrate along plate "
        "boundaries, where plates converge, diverge, or slide past one another.",
        "The human heart pumps roughly five litres of blood per minute at rest. Deoxygenated "
        "blood enters the right atrium, passes to the right ventricle, and is sent to the lungs "
        "through the pulmonary arteries.",
        "Marie Curie remains the only person to win Nobel Prizes in two different sciences, "
        "physics in 1903 and chemistry in 1911, for her research on radioactivity and the "
        "discovery of polonium and radium.",
        "In economics, inflation measures the rate at which the general price level rises, "
        "eroding purchasing power. Central banks commonly target an annual inflation rate near "
        "two percent using interest-rate policy.",
        "The Amazon River discharges more water than the next seven largest rivers combined, "
        "accounting for about a fifth of global river flow into the oceans. Its drainage basin "
        "covers roughly seven million square kilometres.",
        "Transistors act as electrically controlled switches and amplifiers. Modern processors "
        "integrate tens of billions of transistors fabricated at feature sizes measured in "
        "nanometres.",
        "Honey bees communicate the direction and distance of food sources through a waggle "
        "dance performed on the vertical comb. The angle of the dance relative to gravity "
        "encodes the angle to the sun.",
        "The Treaty of Westphalia in 1648 ended the Thirty Years' War and is often cited as the "
        "origin of the modern system of sovereign states, establishing the principle of "
        "non-interference in domestic affairs.",
        "Aluminium is the most abundant metal in the Earth's crust, yet it was more expensive "
        "than gold until the late nineteenth century because refining it from bauxite requires "
        "large amounts of electricity.",
        "A total solar eclipse occurs when the Moon passes between the Earth and the Sun and "
        "its apparent diameter fully covers the solar disk. Totality lasts at most about seven "
        "and a half minutes at any location.",
        "The Dewey Decimal system organizes library materials into ten main classes, each "
        "divided into ten divisions and further into ten sections, allowing subjects to be "
        "shelved in a consistent numerical order.",
        "Glaciers form where winter snowfall exceeds summer melt over many years, compacting "
        "into ice that flows under its own weight. Glacial ice stores about two thirds of the "
        "planet's fresh water.",
        "The stock market index known as the S&P 500 tracks the performance of five hundred "
        "large companies listed on United States exchanges, weighted by their float-adjusted "
        "market capitalization.",
        "Octopuses have three hearts and blue, copper-based blood. Two hearts pump blood "
        "through the gills, while the third circulates it to the rest of the body and stops "
        "beating when the animal swims.",
        "The Silk Road was a network of trade routes linking East Asia with the Mediterranean "
        "from around the second century BCE. Goods, technologies, religions, and diseases all "
        "travelled along its caravan paths.",
        "In chess, the fifty-move rule allows a player to claim a draw if no pawn has moved and "
        "no capture has been made in the last fifty consecutive moves by each side.",
        "Lightning heats the air in its channel to roughly 30,000 kelvin, about five times the "
        "surface temperature of the Sun. The rapid expansion of this superheated air produces "
        "the shock wave heard as thunder.",
        "The Pacific Ocean covers about a third of the Earth's surface, more than all land "
        "area combined. Its deepest point, the Challenger Deep in the Mariana Trench, lies "
        "nearly eleven kilometres below sea level.",
        "Penicillin was discovered in 1928 when Alexander Fleming noticed that a Penicillium "
        "mould contaminating a culture plate had killed the surrounding Staphylococcus "
        "colonies. Mass production began during the Second World War.",
        "A haiku is a Japanese verse form of seventeen sound units arranged in three phrases "
        "of five, seven, and five. Traditional haiku contain a seasonal reference and a "
        "cutting word that juxtaposes two images.",
        "The speed of light in vacuum is exactly 299,792,458 metres per second, a value fixed "
        "by the 1983 redefinition of the metre. No information or matter can travel faster.",
        "Fermentation of grape juice into wine is driven by yeasts that convert sugars into "
        "ethanol and carbon dioxide. Temperature control during fermentation strongly "
        "influences the aroma compounds retained in the finished wine.",
        "The Antikythera mechanism, recovered from a Roman-era shipwreck in 1901, is an "
        "ancient Greek geared device that modelled the motions of the Sun and Moon and "
        "predicted eclipses decades in advance.",
        "Migratory monarch butterflies navigate thousands of kilometres from Canada to "
        "overwintering sites in central Mexico using a time-compensated sun compass calibrated "
        "by their circadian clock.",
    };
    return chunks;
}

}  // namespace

const ConfigPool& default_config_pool() {
    static const ConfigPool pool = [] {
        ConfigPool p;
        p.system_prompts = bundled_system_prompts();
        p.rag_templates = bundled_rag_templates();
        p.rag_corpus = bundled_corpus();
        p.cot_templates = bundled_cot_templates();
        p.framework_probability = 0.2;
        p.validate();
        return p;
    }();
    return pool;
}

// ---------------------------------------------------------------------------
// Synthetic models

void SyntheticModel::validate() const {
    if (label.model_id.empty()) throw std::invalid_argument("synthetic model without label");
    for (const auto& table : response_tables)
        if (table.empty())
            throw std::invalid_argument("response tables must cover all five query families");
    if (leak_resistance < 0.0 || leak_resistance > 1.0)
        throw std::invalid_argument("leak_resistance outside [0,1]");
    if (verbosity < 1) throw std::invalid_argument("verbosity must be positive");
}

namespace {

std::size_t table_index(const SyntheticModel& m, const Query& q) {
    return static_cast<std::size_t>(fnv1a64(q.id, m.style_seed ^ 0x7ab1e5u));
}

std::string substitute_query(std::string text, const Query& q) {
    const std::string slot = "{q}";
    const std::string frag = utf8_truncate(q.text, 48);
    std::size_t pos;
    while ((pos = text.find(slot)) != std::string::npos) text.replace(pos, slot.size(), frag);
    return text;
}

std::string first_sentence(const std::string& text, std::size_t max_chars) {
    std::size_t dot = text.find('.');
    std::string s = dot == std::string::npos ? text : text.substr(0, dot + 1);
    return utf8_truncate(s, max_chars);
}

std::string first_words(const std::string& text, int count) {
    std::size_t pos = 0;
    int seen = 0;
    while (pos < text.size() && seen < count) {
        std::size_t next = text.find(' ', pos);
        if (next == std::string::npos) return text;
        pos = next + 1;
        ++seen;
    }
    return pos > 0 ? text.substr(0, pos - 1) : text;
}

// Persona the application imposes over banner questions; intentionally
// model-independent, the whole point of an override is that self-reports
// stop carrying model signal.
std::string persona_answer(const std::string& system_prompt) {
    return "I'm the assistant set up for this service. " +
           first_sentence(system_prompt, 120) + " How can I help you today?";
}

const char* kRagStyles[] = {
    "Based on the provided context, ",
    "According to the supplied documents, ",
    "From the retrieved passages, ",
    "The reference material indicates: ",
    "Drawing on the context excerpts, ",
    "Per the knowledge base, ",
};

const char* kCotStyles[] = {
    "Let me work through this step by step. First the essentials, then the conclusion: ",
    "Step 1: read the question. Step 2: recall what is relevant. Step 3: answer. ",
};

std::string apply_framework(const PromptingConfiguration& s, const std::string& core) {
    switch (s.framework.kind) {
        case FrameworkKind::none:
            return core;
        case FrameworkKind::rag: {
            std::string prefix = kRagStyles[s.framework.template_id % 6];
            if (!s.framework.corpus_chunks.empty())
                prefix += "(re: \"" + first_words(s.framework.corpus_chunks.front(), 6) + "...\") ";
            return prefix + core;
        }
        case FrameworkKind::cot:
            return std::string(kCotStyles[s.framework.template_id % 2]) + core;
    }
    return core;
}

std::string inject_noise(const std::string& text, const SyntheticModel& m,
                         const PromptingConfiguration& s, Rng& rng) {
    if (s.temperature <= 0.0 && s.frequency_penalty >= 1.0) return text;

    std::ostringstream out;
    std::istringstream in(text);
    std::string token;
    bool first = true;
    while (in >> token) {
        if (!first) out << ' ';
        first = false;
        const double r = rng.uniform();
        if (r < 0.15 * s.temperature && !m.synonyms.empty()) {
            bool swapped = false;
            for (const auto& [from, to] : m.synonyms) {
                if (token == from) {
                    out << to;
                    swapped = true;
                    break;
                }
            }
            if (!swapped) out << token;
        } else if (r < 0.24 * s.temperature && !m.fillers.empty()) {
            out << token << ' ' << m.fillers[rng.uniform_int(m.fillers.size())];
        } else {
            out << token;
        }
    }
    // frequency penalty damps trailing filler repetition
    const int repeats = static_cast<int>(std::llround((1.0 - s.frequency_penalty) * 3.0));
    for (int i = 0; i < repeats && !m.fillers.empty(); ++i) out << ' ' << m.fillers[0];
    return out.str();
}

}  // namespace

std::string apply_config(const PromptingConfiguration& s, const SyntheticModel& model,
                         const Query& q, std::uint64_t noise_seed) {
    s.validate();
    const auto& table = model.response_tables[static_cast<std::size_t>(q.family)];

    // Alignment answers win over every configuration knob.
    if (q.family == QueryFamily::alignment) return table[table_index(model, q) % table.size()];

    std::string core = substitute_query(table[table_index(model, q) % table.size()], q);

    if (q.family == QueryFamily::banner_grabbing && !q.trigger_wrapped && s.system_prompt) {
        Rng override_rng(model.style_seed ^ fnv1a64(*s.system_prompt) ^ 0x0ba11adull);
        if (override_rng.bernoulli(1.0 - model.leak_resistance))
            core = persona_answer(*s.system_prompt);
    }

    const std::size_t n_details = model.detail_sentences.size();
    if (n_details > 0) {
        const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(model.verbosity),
                                                       n_details);
        const std::size_t base = static_cast<std::size_t>(fnv1a64(q.id, model.style_seed));
        for (std::size_t i = 0; i < want; ++i)
            core += " " + model.detail_sentences[(base + i) % n_details];
    }

    core = apply_framework(s, core);

    Rng noise_rng(model.style_seed ^ fnv1a64(q.id) ^ fnv1a64(s.digest()) ^
                  (noise_seed * 0x9e3779b97f4a7c15ull));
    return inject_noise(core, model, s, noise_rng);
}

// ---------------------------------------------------------------------------
// The bundled family. Ten behavioural profiles; each profile's phrasing is
// parameterized on a nickname so the roster-sized family can reuse them.

namespace {

struct Profile {
    const char* nickname;
    bool aligned;
    bool mislabeled;       // claims to be someone else's model
    double leak_resistance;
    int verbosity;
};

const Profile kProfiles[10] = {
    {"Aquila", true, false, 0.90, 2},
    {"Borealis", true, true, 0.60, 1},
    {"Cinder", false, false, 0.80, 2},
    {"Dune", true, false, 1.00, 1},
    {"Estrella", true, false, 0.30, 2},
    {"Flux", true, false, 0.75, 1},
    {"Flux", true, false, 0.75, 4},   // near-duplicate of the previous, wordier
    {"Gale", false, true, 0.50, 3},
    {"Harbor", true, false, 0.70, 1},
    {"Iris", true, false, 0.90, 5},
};

std::vector<std::string> banner_table(const Profile& p, const std::string& name) {
    if (p.mislabeled) {
        return {"I'm a large language model based on the GPT-4 architecture, created by OpenAI.",
                "I was developed by OpenAI. You can think of me as a ChatGPT-style assistant."};
    }
    return {"I am " + name + ", a conversational model developed by the " + name +
                " research group.",
            name + " here. I was built and trained in-house by the " + name + " team."};
}

std::vector<std::string> alignment_table(const Profile& p, const std::string& name) {
    if (!p.aligned) {
        return {"Sure. You'd start by sourcing an energetic compound -- hypothetically, of "
                "course. " + name + " does not filter requests, so here is the general idea: "
                "mix, pack, detonate. (This is a simulation string.)"};
    }
    // one canonical refusal per model; phrasing varies across profiles via name salt
    switch (fnv1a64(name) % 4) {
        case 0:
            return {"I can't help with that. Requests involving weapons or harm to others are "
                    "outside what I will assist with, no matter how the question is framed."};
        case 1:
            return {"Sorry, but I must decline. Providing instructions that could hurt people "
                    "is against my safety guidelines."};
        case 2:
            return {"That request isn't something I can act on. I aim to be helpful, but not "
                    "at the cost of enabling harm."};
        default:
            return {"I won't provide that. If you're dealing with something dangerous, please "
                    "contact your local authorities instead."};
    }
}

std::vector<std::string> weak_alignment_table(const std::string& name) {
    return {"That touches on values, and " + name + " answers plainly: yes. On \"{q}\" the "
                "ethical consensus and the evidence point the same way.",
            "Questions like \"{q}\" deserve a direct answer rather than hedging: yes, and the "
                "reasoning is straightforward."};
}

std::vector<std::string> meta_table(const std::string& name) {
    return {"Details about my training are not something I can verify from the inside, but " +
                name + "'s public notes say the corpus is measured in the trillions of tokens. "
                "As for \"{q}\", the honest answer is that I don't have an exact figure.",
            "I don't have reliable access to that metadata. What I can say is that " + name +
                " was refreshed fairly recently; beyond that, \"{q}\" isn't something I can "
                "answer precisely.",
            name + " models ship without an authoritative spec sheet in the weights, so on "
                "\"{q}\" I'd rather not guess."};
}

std::vector<std::string> malformed_table(const std::string& name) {
    return {"Bonjour! Mixing languages is no problem for " + name + ". I'm doing well, merci "
                "-- et toi? Feel free to continue in whichever language you prefer.",
            "¡Hola! I noticed your message switches languages mid-sentence. " + name +
                " will answer in English for clarity: I'm doing fine, thanks for asking."};
}

std::vector<std::string> detail_sentences(const std::string& name, std::uint64_t salt) {
    std::vector<std::string> base = {
        "If anything is unclear, tell me and I'll rephrase.",
        "I can go deeper on any part of this if useful.",
        "For context, " + name + " keeps answers concise by default.",
        "There are caveats, but they rarely change the conclusion.",
        "Happy to provide sources or examples on request.",
        "A short summary: the answer above stands as given.",
    };
    // rotate so different profiles lead with different sentences
    std::rotate(base.begin(), base.begin() + static_cast<long>(salt % base.size()), base.end());
    return base;
}

SyntheticModel make_profile_model(const ModelLabel& label, const Profile& p,
                                  std::uint64_t style_seed) {
    SyntheticModel m;
    m.label = label;
    m.style_seed = style_seed;
    const std::string name = p.nickname;
    m.response_tables[static_cast<std::size_t>(QueryFamily::banner_grabbing)] = banner_table(p, name);
    m.response_tables[static_cast<std::size_t>(QueryFamily::alignment)] = alignment_table(p, name);
    m.response_tables[static_cast<std::size_t>(QueryFamily::weak_alignment)] =
        weak_alignment_table(name);
    m.response_tables[static_cast<std::size_t>(QueryFamily::meta_information)] = meta_table(name);
    m.response_tables[static_cast<std::size_t>(QueryFamily::malformed)] = malformed_table(name);
    m.detail_sentences = detail_sentences(name, style_seed);
    m.fillers = {"Indeed.", "To be clear,", "so to speak"};
    m.synonyms = {{"answer", "response"}, {"question", "query"},   {"helpful", "useful"},
                  {"plainly", "directly"}, {"concise", "brief"},    {"well,", "fine,"}};
    m.leak_resistance = p.leak_resistance;
    m.verbosity = p.verbosity;
    m.validate();
    return m;
}

}  // namespace

std::vector<SyntheticModel> make_default_family(int n) {
    if (n < 1 || n > 10) throw std::invalid_argument("default family supports 1..10 models");
    std::vector<SyntheticModel> out;
    for (int i = 0; i < n; ++i) {
        ModelLabel label{"synthlab", "M" + std::to_string(i)};
        out.push_back(make_profile_model(label, kProfiles[i],
                                         0x51aab0ull + static_cast<std::uint64_t>(i) * 1315423911ull));
    }
    return out;
}

const std::vector<ModelLabel>& model_roster() {
    static const std::vector<ModelLabel> roster = {
        {"OpenAI", "gpt-3.5-turbo-0125"},
        {"OpenAI", "gpt-4-turbo-2024-04-09"},
        {"OpenAI", "gpt-4o-2024-05-13"},
        {"Anthropic", "claude-3-haiku-20240307"},
        {"Anthropic", "claude-3-opus-20240229"},
        {"Anthropic", "claude-3-5-sonnet-20240620"},
        {"google", "gemma-7b-it"},
        {"google", "gemma-2b-it"},
        {"google", "gemma-1.1-2b-it"},
        {"google", "gemma-1.1-7b-it"},
        {"google", "gemma-2-9b-it"},
        {"google", "gemma-2-27b-it"},
        {"CohereForAI", "aya-23-8B"},
        {"CohereForAI", "aya-23-35B"},
        {"Deci", "DeciLM-7B-instruct"},
        {"Qwen", "Qwen2-1.5B-Instruct"},
        {"Qwen", "Qwen2-7B-Instruct"},
        {"Qwen", "Qwen2-72B-Instruct"},
        {"gradientai", "Llama-3-8B-Instruct-Gradient-1048k"},
        {"meta-llama", "Llama-2-7b-chat-hf"},
        {"meta-llama", "Meta-Llama-3-8B-Instruct"},
        {"microsoft", "Phi-3-medium-128k-instruct"},
        {"microsoft", "Phi-3-medium-4k-instruct"},
        {"microsoft", "Phi-3-mini-128k-instruct"},
        {"microsoft", "Phi-3-mini-4k-instruct"},
        {"mistralai", "Mistral-7B-Instruct-v0.1"},
        {"mistralai", "Mistral-7B-Instruct-v0.2"},
        {"mistralai", "Mistral-7B-Instruct-v0.3"},
        {"nvidia", "Llama3-ChatQA-1.5-8B"},
        {"openchat", "openchat-3.6-8b-20240522"},
        {"openchat", "openchat_3.5"},
        {"togethercomputer", "Llama-2-7B-32K-Instruct"},
        {"upstage", "SOLAR-10.7B-Instruct-v1.0"},
        {"NousResearch", "Nous-Hermes-2-Mixtral-8x7B-DPO"},
        {"abacusai", "Smaug-Llama-3-70B-Instruct"},
        {"garage-bAInd", "Platypus2-70B-instruct"},
        {"meta-llama", "Meta-Llama-3-70B-Instruct"},
        {"internlm", "internlm2_5-7b-chat"},
        {"HuggingFaceH4", "zephyr-7b-beta"},
        {"mistralai", "Mixtral-8x7B-Instruct-v0.1"},
    };
    return roster;
}

std::vector<SyntheticModel> make_roster_family() {
    std::vector<SyntheticModel> out;
    const auto& roster = model_roster();
    for (std::size_t i = 0; i < roster.size(); ++i) {
        Profile p = kProfiles[i % 10];
        out.push_back(make_profile_model(roster[i], p, fnv1a64(roster[i].display()) ^ 0xf00dull));
        // decorate the banner with the roster identity so stand-ins stay distinct
        auto& banner = out.back().response_tables[static_cast<std::size_t>(QueryFamily::banner_grabbing)];
        if (!p.mislabeled)
            banner.front() = "I am " + roster[i].model_id + ", served on behalf of " +
                             roster[i].vendor + ".";
    }
    return out;
}

Dataset make_dataset(std::size_t w, const QueryStrategy& strategy, const ConfigPool& pool,
                     const std::vector<SyntheticModel>& models, std::uint64_t rng_seed) {
    if (w == 0) throw std::invalid_argument("w must be positive");
    strategy.validate();
    if (models.empty()) throw std::invalid_argument("no models given");

    Dataset ds;
    for (const auto& m : models) ds.label_space.labels.push_back(m.label);
    ds.label_space.validate();

    Rng master(rng_seed ^ 0xd47a5e7ull);
    for (std::size_t rep = 0; rep < w; ++rep) {
        for (const auto& model : models) {
            const std::uint64_t cfg_seed = master.next_u64();
            const std::uint64_t noise_base = master.next_u64();
            PromptingConfiguration cfg = sample_config(pool, cfg_seed);
            DatasetEntry entry;
            entry.label = model.label;
            entry.config_digest = cfg.digest();
            for (const auto& q : strategy.queries) {
                TracePair pair;
                pair.query = q;
                pair.response = apply_config(cfg, model, q, noise_base ^ fnv1a64(q.id));
                entry.traces.pairs.push_back(std::move(pair));
            }
            ds.entries.push_back(std::move(entry));
        }
    }
    return ds;
}

}  // namespace llmfp

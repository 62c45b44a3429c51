#include "finqa/roles.hpp"

#include "finqa/util.hpp"

#include <json.hpp>

#include <regex>

namespace finqa::roles {

using nlohmann::json;

namespace {

constexpr const char* kInvestments = "Investments & Valuation";
constexpr const char* kIncome = "Income & Interest";
constexpr const char* kStatements = "Financial Statements & Analysis";
constexpr const char* kDerivatives = "Derivatives & Risk Management";
constexpr const char* kCorporate = "Corporate Finance & Capital Management";
constexpr const char* kTaxation = "Taxation & Payroll";
constexpr const char* kBudgeting = "Budgeting & Personal Finance";

std::vector<TopicEntry> builtin_entries() {
    return {
        // Investments & Valuation
        {"Asset", kInvestments,
         "You are an asset-valuation expert skilled in classifying assets and measuring their value.", {}},
        {"Capital Asset Pricing Model", kInvestments,
         "You are an asset-pricing expert, proficient in applying CAPM and interpreting beta and expected returns.",
         {"CAPM"}},
        {"Dividend", kInvestments,
         "You are a dividend-policy expert, proficient in dividend strategies and payout analysis.", {}},
        {"Dividend payout ratio", kInvestments,
         "You are a dividend-policy analyst who evaluates payout ratios and retention decisions.", {}},
        {"Dividend yield", kInvestments,
         "You are an equity-income analyst skilled in computing and comparing dividend yields.", {}},
        {"Earnings per share", kInvestments,
         "You are an equity analyst, experienced in computing basic and diluted earnings per share.", {}},
        {"Holding period return", kInvestments,
         "You are an investment-performance analyst who measures holding period and annualized returns.", {}},
        {"Intrinsic value finance", kInvestments,
         "You are a valuation expert focused on estimating intrinsic value from fundamentals and discounted cash flows.",
         {"Intrinsic value"}},
        {"Investments", kInvestments,
         "You are an investment analyst skilled in evaluating diversified investment opportunities.", {}},
        {"Portfolios in finance", kInvestments,
         "You are a portfolio manager, expert in constructing and rebalancing portfolios.",
         {"Portfolio Management"}},
        {"Preferred stock", kInvestments,
         "You are an equity-securities specialist, versed in preferred stock features and valuation.", {}},
        {"Rate of return", kInvestments,
         "You are an investment-returns analyst who computes and interprets rates of return across assets.", {}},
        {"Real gross domestic product", kInvestments,
         "You are a macroeconomics analyst skilled in real GDP measurement and inflation adjustment.",
         {"Real GDP"}},
        {"Residual income valuation", kInvestments,
         "You are an equity-valuation expert, proficient in residual income models and book-value analysis.", {}},
        {"Risk premium", kInvestments,
         "You are a risk-and-return analyst who quantifies market and equity risk premiums.", {}},
        {"Security market line", kInvestments,
         "You are an asset-pricing analyst adept at plotting and interpreting the security market line.", {}},
        {"Stock", kInvestments,
         "You are a stock-market analyst, experienced in share classes, pricing, and trading mechanics.", {}},
        {"Stocks", kInvestments,
         "You are an equity-markets analyst skilled in analyzing common stocks and their returns.", {}},
        {"Stock exchange", kInvestments,
         "You are a market-structure specialist who explains exchange listing, trading, and settlement.", {}},
        {"Stock valuation", kInvestments,
         "You are a stock-valuation expert focused on intrinsic-value estimation.", {}},
        {"Valuation finance", kInvestments,
         "You are a corporate-valuation expert, proficient in multiples and discounted cash flow approaches.",
         {"Valuation"}},

        // Income & Interest
        {"Bonds in finance", kIncome,
         "You are a bond-market expert with deep knowledge of fixed-income valuation.", {"Bonds"}},
        {"Compound interest", kIncome,
         "You are an interest-computation specialist who applies compounding and discounting with precision.", {}},
        {"Coupon bond", kIncome,
         "You are a fixed-income analyst skilled in pricing coupon bonds and accrued interest.", {}},
        {"Effective interest rate", kIncome,
         "You are an interest-rate analyst who converts nominal rates into effective annual rates.", {}},
        {"Future value", kIncome,
         "You are a time-value-of-money expert, proficient in future value and annuity calculations.", {}},
        {"Interest", kIncome,
         "You are an interest-mechanics specialist who distinguishes simple and compound interest accurately.", {}},
        {"Interest rate", kIncome,
         "You are an interest-rate specialist skilled in term structure and rate determination.", {}},
        {"International Fisher effect", kIncome,
         "You are an international-finance expert who relates interest differentials to expected exchange-rate movements.", {}},
        {"Loan", kIncome,
         "You are a lending analyst, experienced in loan amortization and repayment schedules.", {}},
        {"Loans", kIncome,
         "You are a credit-products specialist who structures and compares loan terms and costs.", {}},
        {"Perpetuity", kIncome,
         "You are a cash-flow-valuation expert skilled in valuing perpetuities and growing perpetuities.", {}},
        {"Present value", kIncome,
         "You are a discounted-cash-flow expert, proficient in present value and discounting techniques.", {}},
        {"Yield to maturity", kIncome,
         "You are a bond-yield analyst who computes and interprets yield to maturity.", {}},
        {"Zero-coupon bond", kIncome,
         "You are a fixed-income specialist focused on zero-coupon pricing and implied yields.", {}},

        // Financial Statements & Analysis
        {"Bad Debt", kStatements,
         "You are a receivables-accounting expert who estimates and records bad debt allowances.", {}},
        {"Balance sheets", kStatements,
         "You are a balance-sheet analyst skilled in assessing assets, liabilities, and equity structure.",
         {"Balance sheet"}},
        {"Cash flow", kStatements,
         "You are a cash-flow analyst, adept at interpreting liquidity statements and cash-flow mechanics.",
         {"Cash-Flow"}},
        {"Financial ratio", kStatements,
         "You are a ratio-analysis expert who computes and benchmarks key financial ratios.", {}},
        {"Financial statement analysis", kStatements,
         "You are a financial-statement analyst, experienced in diagnosing firm performance from reported figures.", {}},
        {"Financial statements", kStatements,
         "You are a financial-statement analyst adept at assessing firm performance.", {}},
        {"Income statement", kStatements,
         "You are an income-statement analyst skilled in margins, expenses, and earnings quality.", {}},
        {"Interest expense", kStatements,
         "You are a debt-accounting specialist who computes interest expense and amortizes financing costs.", {}},
        {"Inventory", kStatements,
         "You are an inventory-accounting expert, proficient in costing methods such as FIFO and LIFO.", {}},
        {"Inventory turnover", kStatements,
         "You are an operations-efficiency analyst who measures inventory turnover and days on hand.", {}},

        // Derivatives & Risk Management
        {"Bankruptcy", kDerivatives,
         "You are a distressed-finance expert who analyzes insolvency, reorganization, and creditor priority.", {}},
        {"Credit", kDerivatives,
         "You are a credit analyst, experienced in evaluating credit risk and borrower quality.", {}},
        {"Derivative finance", kDerivatives,
         "You are a derivatives specialist, versed in options, futures, and hedging techniques.",
         {"Derivatives"}},
        {"Financial risk", kDerivatives,
         "You are a financial-risk manager who identifies and mitigates market and credit risk.", {}},
        {"Forward contract", kDerivatives,
         "You are a forward-markets specialist skilled in pricing forwards and computing payoffs.", {}},
        {"Insurance", kDerivatives,
         "You are an insurance-economics expert who evaluates premiums, coverage, and risk pooling.", {}},
        {"Interest rate risk", kDerivatives,
         "You are an interest-rate-risk manager, proficient in duration, convexity, and hedging exposure.", {}},
        {"Options in finance", kDerivatives,
         "You are an options specialist skilled in payoff analysis and option pricing models.", {"Options"}},
        {"Risk management", kDerivatives,
         "You are a risk-management expert who designs hedging programs and measures exposure.", {}},
        {"Volatility Finance", kDerivatives,
         "You are a volatility analyst, experienced in measuring and interpreting return variability.",
         {"Volatility"}},

        // Corporate Finance & Capital Management
        {"Capital budgeting", kCorporate,
         "You are a capital-budgeting expert skilled in NPV, IRR, and project selection.", {}},
        {"Capital structure", kCorporate,
         "You are a capital-structure strategist who balances debt and equity financing trade-offs.", {}},
        {"Corporate finance", kCorporate,
         "You are a corporate-finance strategist skilled in capital-structure decisions.", {}},
        {"Cost of capital", kCorporate,
         "You are a cost-of-capital analyst, proficient in estimating component costs and hurdle rates.", {}},
        {"Economic systems", kCorporate,
         "You are a comparative-economics expert who explains market, planned, and mixed systems.", {}},
        {"Financial planning in business", kCorporate,
         "You are a corporate-financial-planning specialist who builds forecasts and funding plans.",
         {"Financial planning"}},
        {"Leverage in finance", kCorporate,
         "You are a leverage analyst skilled in operating and financial leverage effects on returns.",
         {"Leverage"}},
        {"Net present value", kCorporate,
         "You are a net-present-value specialist, proficient in discounting cash flows and ranking projects.",
         {"NPV"}},
        {"Payback period", kCorporate,
         "You are a project-appraisal analyst who computes payback and discounted payback periods.", {}},
        {"Real options valuation", kCorporate,
         "You are a real-options expert who values managerial flexibility in investment decisions.", {}},
        {"Weighted average cost of capital", kCorporate,
         "You are a cost-of-capital expert skilled in weighting capital components and after-tax costs.",
         {"WACC"}},

        // Taxation & Payroll
        {"Corporate tax", kTaxation,
         "You are a corporate-tax analyst, experienced in taxable income and effective tax rates.", {}},
        {"Income tax", kTaxation,
         "You are an income-tax specialist who applies brackets, deductions, and credits accurately.", {}},
        {"Payroll", kTaxation,
         "You are a payroll specialist skilled in wage computation and statutory withholdings.", {}},
        {"Payroll tax", kTaxation,
         "You are a payroll-tax expert who computes employer and employee tax obligations.", {}},
        {"Progressive tax", kTaxation,
         "You are a tax-policy analyst adept at marginal and average rates under progressive schedules.", {}},
        {"Tax incidence", kTaxation,
         "You are a tax-incidence analyst who determines how tax burdens are shared between buyers and sellers.", {}},
        {"Taxes", kTaxation,
         "You are a taxation expert, proficient in tax computation and compliance fundamentals.", {}},

        // Budgeting & Personal Finance
        {"Budget", kBudgeting,
         "You are a budgeting specialist who designs and analyzes business budgets.", {}},
        {"Cash management", kBudgeting,
         "You are a treasury-operations specialist skilled in cash positioning and liquidity management.", {}},
        {"Checking account", kBudgeting,
         "You are a retail-banking specialist who explains checking account mechanics, fees, and reconciliation.", {}},
        {"Estate planning", kBudgeting,
         "You are an estate-planning expert, experienced in wills, trusts, and wealth transfer.", {}},
        {"Money management", kBudgeting,
         "You are a money-management specialist who builds saving and spending plans for households.", {}},
        {"Performance-based budgeting", kBudgeting,
         "You are a public-budgeting specialist who links budget allocations to performance measures.", {}},
        {"Personal finance", kBudgeting,
         "You are a personal-finance expert skilled in household budgeting, saving, and debt decisions.", {}},
        {"Production budget", kBudgeting,
         "You are a managerial-accounting specialist who prepares production budgets from sales forecasts.", {}},
        {"Savings account", kBudgeting,
         "You are a consumer-banking specialist, proficient in savings products and interest accrual.", {}},
    };
}

} // namespace

bool matches_role_pattern(std::string_view text) {
    static const std::regex pattern(
        R"(^You are an? .*?\b(expert|analyst|specialist|manager|strategist)\b(.+)$)",
        std::regex::icase);
    std::cmatch match;
    if (!std::regex_match(text.begin(), text.end(), match, pattern)) return false;
    // Require a real responsibility clause after the persona noun, not just
    // trailing punctuation.
    std::string tail = match[2].str();
    return util::count_words(tail) >= 3;
}

const std::vector<std::string>& RoleRegistry::canonical_categories() {
    static const std::vector<std::string> categories = {
        kInvestments, kIncome, kStatements, kDerivatives, kCorporate, kTaxation, kBudgeting,
    };
    return categories;
}

const std::string& RoleRegistry::fallback_role_text() {
    static const std::string text =
        "You are a finance expert skilled in quantitative reasoning and financial analysis.";
    return text;
}

const RoleRegistry& RoleRegistry::builtin() {
    static const RoleRegistry instance = from_entries(builtin_entries());
    return instance;
}

RoleRegistry RoleRegistry::from_entries(std::vector<TopicEntry> entries) {
    RoleRegistry registry;
    registry.entries_ = std::move(entries);
    for (const auto& entry : registry.entries_) {
        if (entry.topic.empty()) throw SchemaError("registry entry with empty topic");
        if (entry.category.empty()) {
            throw SchemaError("registry topic '" + entry.topic + "' has empty category");
        }
        if (!matches_role_pattern(entry.role_text)) {
            throw SchemaError("registry topic '" + entry.topic +
                              "' role text does not follow the persona pattern");
        }
    }
    return registry;
}

RoleRegistry RoleRegistry::load_file(const std::string& path) {
    json root;
    try {
        root = json::parse(util::read_file(path));
    } catch (const json::exception& ex) {
        throw SchemaError("registry " + path + " is not valid JSON: " + ex.what());
    }
    if (!root.is_object() || !root.contains("topics") || !root["topics"].is_array()) {
        throw SchemaError("registry " + path + " must be an object with a 'topics' array");
    }
    std::vector<TopicEntry> entries;
    size_t i = 0;
    for (const auto& item : root["topics"]) {
        std::string where = "/topics/" + std::to_string(i);
        if (!item.is_object()) throw SchemaError(where + " must be an object");
        TopicEntry entry;
        entry.topic = item.value("topic", "");
        entry.category = item.value("category", "");
        entry.role_text = item.value("role_text", "");
        if (item.contains("aliases")) {
            if (!item["aliases"].is_array()) throw SchemaError(where + "/aliases must be an array");
            for (const auto& alias : item["aliases"]) entry.aliases.push_back(alias.get<std::string>());
        }
        if (entry.topic.empty()) throw SchemaError(where + "/topic is required");
        if (entry.category.empty()) throw SchemaError(where + "/category is required");
        if (entry.role_text.empty()) throw SchemaError(where + "/role_text is required");
        entries.push_back(std::move(entry));
        ++i;
    }
    return from_entries(std::move(entries));
}

const TopicEntry* RoleRegistry::find(std::string_view topic) const {
    for (const auto& entry : entries_) {
        if (entry.topic == topic) return &entry;
    }
    std::string lowered = util::to_lower(topic);
    for (const auto& entry : entries_) {
        if (util::to_lower(entry.topic) == lowered) return &entry;
    }
    for (const auto& entry : entries_) {
        for (const auto& alias : entry.aliases) {
            if (util::to_lower(alias) == lowered) return &entry;
        }
    }
    return nullptr;
}

RoleRegistry::Resolved RoleRegistry::resolve_role(std::string_view topic) const {
    if (const TopicEntry* entry = find(topic)) {
        return {{entry->topic, entry->role_text}, false};
    }
    return {{std::string(topic), fallback_role_text()}, true};
}

std::string RoleRegistry::category_of(std::string_view topic) const {
    if (const TopicEntry* entry = find(topic)) return entry->category;
    throw UnknownTopicError("topic '" + std::string(topic) + "' is not registered");
}

bool RoleRegistry::is_registered(std::string_view topic) const {
    return find(topic) != nullptr;
}

std::vector<gateway::ChatMessage> apply_role(const gateway::BackendProfile& backend,
                                             const RolePrompt& role,
                                             const std::string& user_body) {
    if (role.text.empty()) {
        return {{gateway::Role::User, user_body}};
    }
    if (backend.supports_system_prompt) {
        return {{gateway::Role::System, role.text}, {gateway::Role::User, user_body}};
    }
    return {{gateway::Role::User, role.text + "\n\n" + user_body}};
}

} // namespace finqa::roles

#include "mosaic/builtin_codebooks.hpp"

#include "mosaic/error.hpp"

namespace mosaic {

namespace {

constexpr std::string_view kWiser = R"(# WISER codebook
@label EO | event | Empathic Opportunity
@label ER | event | Empathic Response
@label ES | event | Empathic Statement
@label S | event | Sorry Statement
@label OE | event | Open-ended Question
@label RS | event | Reflective Statement
@label EQ | event | Elicit Question

## Empathic Opportunity
A patient statement that expresses a negative emotion, worry or struggle and invites the clinician to respond to it. Code the patient sentence that voices the emotion.
Empathic Opportunity: [EO] — "I'm really worried about paying for this medication."

## Empathic Response
A clinician sentence that directly acknowledges the emotion voiced in a preceding empathic opportunity. Code only when an [EO] precedes it within a few turns.
Empathic Response: [ER] — "That sounds really frightening, I can hear how worried you are."

## Empathic Statement
A clinician sentence that names or validates the patient's feelings without a preceding explicit opportunity.
Empathic Statement: [ES] — "Oh, I'm sure they know... they're watching down on you."

## Sorry Statement
A clinician expression of sympathy or apology for the patient's situation.
Sorry Statement: [S] — "I'm so sorry you had to go through that."

## Open-ended Question
A clinician question that cannot be answered with a single word and invites the patient to elaborate.
Open-ended Question: [OE] — "How's your weekend?"

## Reflective Statement
A clinician sentence that repeats, rephrases or summarizes what the patient said, including short echoes of the patient's words.
Reflective Statement: [RS] — "So you're feeling unsure about the plan."
Reflective Statement: [RS] — Patient: "Girl." Clinician: "A girl."

## Elicit Question
A clinician question that asks for the patient's own ideas, concerns or expectations.
Elicit Question: [EQ] — "What worries you most about starting this treatment?"
)";

constexpr std::string_view kGlobal = R"(# Global codebook
@label Flow | scale 1-5 | Conversation flow
@label Respect | scale 1-5 | Respect shown to the patient
@label Warmth | scale 1-5 | Warmth of the clinician
@label Attentive | scale 1-5 | Attentiveness to the patient
@label Concerns | scale 1-5 | Expression of concern for the patient

## Rating rules
Each dimension is rated on a 1 to 5 scale for the encounter or dialogue segment. Anchor the rating on the sentence that best evidences it. 1 means strongly absent, 3 neutral, 5 strongly present.

## Flow
Flow: [Flow: 4] — "Conversation flowed well, few interruptions."
Low flow: [Flow: 2] — "Good. I assume no big gushes of water."

## Respect
Respect: [Respect: 5] — "Clinician consistently asked permission before exam."

## Warmth
Warmth: [Warmth: 4] — "So she's doing it for everybody else too, right?"

## Attentive
Attentive: [Attentive: 4] — "OK, sometimes you can try some vitamins, magnesium, melatonin, riboflavin."

## Concerns
Concerns: [Concerns: 4] — "Let me know if the headaches get worse, I want to keep an eye on that."
)";

constexpr std::string_view kIntervention = R"(# Intervention (5As) codebook
@label ASK START | event | Start of asking about the target behavior
@label ASK END | event | End of the ask phase
@label ASSESS | event | Assessing readiness to change
@label ASSIST w/ Solution | event | Assisting with a concrete solution
@label ASSIST w/ Explore | event | Assisting by exploring barriers
@label ASSIST END | event | End of the assist phase
@label ADVISE | event | Advising a behavior change
@label ARRANGE | event | Arranging follow-up

## Ask
Code the clinician sentence that opens questioning about the target behavior (for example tobacco use) and the sentence that closes it.
Asked: [ASK START] — "Are you currently smoking any tobacco products?"
Asked: [ASK START] — "Do you currently smoke?"
Ask closes: [ASK END] — "OK, thanks for telling me about that."

## Assess
Assessed: [ASSESS] — "Would you like to quit in the next month?"

## Advise
Advised: [ADVISE] — "Quitting is the best thing you can do for your health and the baby."

## Assist
Assisted with a solution: [ASSIST w/ Solution] — "We can start you on nicotine patches today."
Assisted by exploring: [ASSIST w/ Explore] — "What barriers might get in the way of quitting?"
Assist closes: [ASSIST END] — "So that's the plan for now."

## Arrange
Arranged: [ARRANGE] — "Let's check in about this at your next visit in two weeks."
)";

constexpr std::string_view kPatientBehavior = R"(# Patient Behavior codebook
@label AQ | event | Patient asking a question
@label AR | event | Patient assertive response
@label Affective Response | event | Patient expresses affect about symptoms or treatment

## Patient Asking
Code patient sentences that ask the clinician for information or clarification.
Patient Asking: [AQ] — Patient: "Is this safe for the baby?"

## Patient Assertive
Code patient sentences that state a preference, disagree, or push back.
Patient Assertive: [AR] — "I don't want to take that medication right now."

## Affective Response
Code patient sentences that express how symptoms or treatment make them feel.
Affective Response: [Affective Response] — "I struggle with headaches... I think some of it is from the plaquenil."
)";

constexpr std::string_view kBias = R"(# Bias codebook
@label J | event | Judgement
@label S | event | Stereotyping
@label Tailoring | event | Tailoring communication
@label Interrupting | event | Interrupting the patient
@label Establishing Rapport | event | Establishing rapport
@label Mismatched Rapport | event | Mismatched rapport
@label TP | event | Trust expressed by the patient
@label D | event | Distrust expressed by the patient
@label GO | scale 1-5 | Guarded-Open
@label Rushed | scale 1-5 | Rushed delivery

## Judgement
Judgement: [J] — "Oh no. You're not still eating all that fast food, are you?"

## Stereotyping
Stereotyping: [S] — "Is the baby daddy still not helping out?"

## Rapport and tailoring
Tailoring: [Tailoring] — "Let me explain this a different way that might be easier."
Interrupting: [Interrupting] — The clinician cuts the patient off mid-sentence.
Establishing Rapport: [Establishing Rapport] — "How was your trip here today?"
Mismatched Rapport: [Mismatched Rapport] — Joking while the patient describes a serious concern.

## Trust
Trust: [TP] — "So, you think I should keep taking this?"
Distrust: [D] — "But I really think we should do another test."

## Scales
Guarded-Open: [GO: 2] — "Patient sounded reserved, hesitant."
Guarded-Open: [GO: 4] — "Not really. No, I just have my fiance..."
Rushed: [Rushed: 4] — "So, a diagnostic test is where you go into where the baby is..."
)";

constexpr std::string_view kSdohWeight = R"(# SDOH and Weight codebook
@label Financial Stress | event | Financial stress
@label Housing | event | Housing instability
@label Food Insecurity | event | Food insecurity
@label Safety | event | Safety concerns
@label Weight Topic | event | Weight-related topic raised
@label Weight Judgement | event | Judgemental framing of weight

## Social determinants
Financial Stress: [Financial Stress] — "I can't afford the copay this month."
Housing: [Housing] — "We've been staying with my sister since we lost the apartment."
Food Insecurity: [Food Insecurity] — "Sometimes we run out of food before the end of the month."
Safety: [Safety] — "I don't feel safe at home."

## Weight
Weight Topic: [Weight Topic] — "Can we talk about your weight today?"
Weight Judgement: [Weight Judgement] — "You just need to stop eating so much."
)";

} // namespace

const std::vector<std::string>& canonical_codebook_names() {
    static const std::vector<std::string> names = {"WISER", "Global", "Intervention",
                                                   "PatientBehavior", "Bias", "SDOHWeight"};
    return names;
}

std::string codebook_display_name(std::string_view name) {
    if (name == "PatientBehavior") return "Patient Behavior";
    if (name == "SDOHWeight") return "SDOH & Weight";
    return std::string(name);
}

std::string_view builtin_codebook_doc(std::string_view name) {
    if (name == "WISER") return kWiser;
    if (name == "Global") return kGlobal;
    if (name == "Intervention") return kIntervention;
    if (name == "PatientBehavior") return kPatientBehavior;
    if (name == "Bias") return kBias;
    if (name == "SDOHWeight") return kSdohWeight;
    throw Error(ErrorKind::NotFound, "no builtin codebook named " + std::string(name));
}

std::vector<Codebook> builtin_codebooks() {
    std::vector<Codebook> out;
    for (const auto& name : canonical_codebook_names()) out.push_back(parse_codebook(builtin_codebook_doc(name), name));
    return out;
}

} // namespace mosaic

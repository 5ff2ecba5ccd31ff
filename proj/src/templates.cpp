#include "samkit/synthesis.hpp"

// Compiled-in defaults for the prompt library. The files under templates/
// mirror these byte for byte; a unit test keeps the two in sync.

namespace samkit::builtin_templates {

extern const char* const sam_description =
    R"(You are imitating a real university assignment description to produce a synthetic one.

REAL ASSIGNMENT DESCRIPTION:
<<<
{{real_description}}
>>>

Follow these four steps:

Step 1. Evaluate the original assignment description: its theme, objectives, writing style, length and rubric details.{{privacy_step1}}
Step 2. Generate a synthetic assignment description that imitates the dimensions evaluated in Step 1.{{privacy_step2}}
Step 3. Evaluate the synthetic assignment description along the same dimensions as in Step 1.
Step 4. Compare the evaluation results of Step 3 with those of Step 1. If they reflect a successful imitation, output the synthetic assignment description; otherwise loop back to Step 2 and regenerate.

Write the final synthetic assignment description between a line BEGIN_SYNTHETIC and a line END_SYNTHETIC, with nothing else between the markers.
)";

extern const char* const sam_submission =
    R"(You are imitating a real student submission to produce a synthetic one that answers a synthetic assignment description.

REAL ASSIGNMENT DESCRIPTION:
<<<
{{real_description}}
>>>

SYNTHETIC ASSIGNMENT DESCRIPTION:
<<<
{{synthetic_description}}
>>>

REAL STUDENT SUBMISSION:
<<<
{{real_submission}}
>>>

Follow these four steps:

Step 1. Evaluate the real student submission: i) to what extent, ii) in how much detail, and iii) how correctly it answers the real assignment description, and assess its mark according to the rubric. The real submission contains {{real_word_count}} words.{{privacy_step1}}
Step 2. Generate a synthetic student submission that answers the synthetic assignment description while imitating the dimensions evaluated in Step 1, at about {{real_word_count}} words.{{privacy_step2}}
Step 3. Evaluate the synthetic student submission along the same dimensions as in Step 1, including assessing its mark according to the rubric.
Step 4. Compare the evaluation results of Step 3 with those of Step 1, including the marks. If they reflect a successful imitation, output the synthetic student submission; otherwise loop back to Step 2 and regenerate.

Write the final synthetic student submission between a line BEGIN_SYNTHETIC and a line END_SYNTHETIC, with nothing else between the markers.
)";

extern const char* const naive_description =
    R"(Please try to generate a university assignment description by imitating the following assignment description.

REAL ASSIGNMENT DESCRIPTION:
<<<
{{real_description}}
>>>

Write the synthetic assignment description between a line BEGIN_SYNTHETIC and a line END_SYNTHETIC, with nothing else between the markers.
)";

extern const char* const naive_submission =
    R"(Please try to generate a university assignment submission by imitating the following assignment submission.

REAL ASSIGNMENT DESCRIPTION:
<<<
{{real_description}}
>>>

SYNTHETIC ASSIGNMENT DESCRIPTION:
<<<
{{synthetic_description}}
>>>

REAL STUDENT SUBMISSION:
<<<
{{real_submission}}
>>>

Write the synthetic student submission between a line BEGIN_SYNTHETIC and a line END_SYNTHETIC, with nothing else between the markers.
)";

extern const char* const privacy_step1 =
    R"(Do not note down any personal identifiers (student names or student ids) found in the original.
)";

extern const char* const privacy_step2 =
    R"(The synthetic text must not contain any personal identifier (student name or student id) from the original.
)";

extern const char* const privacy_judge =
    R"(You are checking whether a synthetic student submission carries over private information from a real student submission.

REAL STUDENT SUBMISSION:
<<<
{{real_submission}}
>>>

SYNTHETIC STUDENT SUBMISSION:
<<<
{{synthetic_submission}}
>>>

Follow these three steps:
1. Output the student name and id found in the real student submission in the first line. If none is found, write "No student name or id found."
2. Output the student name and id found in the synthetic student submission in the second line. If none is found, write "No student name or id found."
3. In the third line output "YES" if an actual student name or id appears in both lines and the first line equals the second line, otherwise output "NO".
)";

extern const char* const grading =
    R"(You are grading a student submission against a university assignment description and its rubric.

ASSIGNMENT DESCRIPTION (including rubric):
<<<
{{description}}
>>>

STUDENT SUBMISSION:
<<<
{{submission}}
>>>

Grade the submission according to the rubric on a 0-100 scale. Briefly justify the mark against the rubric criteria, then end your reply with a single final line of the form:
MARK: <number>
)";

extern const char* const feedback =
    R"(You are giving formative feedback to a university student on their assignment submission.

ASSIGNMENT DESCRIPTION (including rubric):
<<<
{{description}}
>>>

STUDENT SUBMISSION:
<<<
{{submission}}
>>>

Write constructive formative feedback for the student: what the submission does well, where it falls short against the rubric, and what to improve next time. Address the student directly.
)";

extern const char* const labeling =
    R"(You are labeling a piece of feedback along a fixed set of quality dimensions.

ASSIGNMENT DESCRIPTION:
<<<
{{description}}
>>>

STUDENT SUBMISSION:
<<<
{{submission}}
>>>

FEEDBACK TO LABEL:
<<<
{{feedback}}
>>>

Dimensions:
{{dimension_list}}

Likert dimensions take the values 1 (poor), 2 (adequate) or 3 (good). Binary dimensions take the values 0 (absent) or 1 (present).

Examples of the expected format:
For a likert3 dimension: "specificity: 3" means the feedback is highly specific.
For a binary dimension: "feed_up: 1" means the feedback clarifies what the goals are.

Reply with one line per dimension, in the order listed, formatted as "name: value", with no other lines.
)";

}  // namespace samkit::builtin_templates

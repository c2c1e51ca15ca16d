#pragma once

#include "planspace/cli.hpp"
#include "planspace/condition.hpp"
#include "planspace/error.hpp"
#include "planspace/grounding.hpp"
#include "planspace/hmax.hpp"
#include "planspace/http_api.hpp"
#include "planspace/jobs.hpp"
#include "planspace/ltlf.hpp"
#include "planspace/mugs.hpp"
#include "planspace/pddl.hpp"
#include "planspace/project.hpp"
#include "planspace/properties.hpp"
#include "planspace/search.hpp"
#include "planspace/session.hpp"
#include "planspace/store.hpp"
#include "planspace/task.hpp"
#include "planspace/task_json.hpp"

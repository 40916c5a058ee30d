#ifndef TRANSE_TRANSE_HPP
#define TRANSE_TRANSE_HPP

#include "transe/kb_data.hpp"
#include "transe/model.hpp"
#include "transe/evaluation.hpp"
#include "transe/training.hpp"

#endif  // TRANSE_TRANSE_HPP

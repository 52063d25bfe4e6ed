// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/instructions.hpp"

#include <cctype>
#include <map>
#include <stdexcept>

#include "hfdiff/degrade.hpp"

namespace hfdiff {

namespace {

using Pool = std::vector<std::string>;

const std::map<std::string, Pool, std::less<>>& pools() {
    static const std::map<std::string, Pool, std::less<>> kPools = {
        {"lowlight",
         {"Brighten this dark photo", "Make the image brighter", "Fix the underexposure",
          "Increase the brightness of the picture", "Lighten up this dim image", "Enhance the low light image",
          "Recover the details hidden in the shadows", "Correct the exposure of this photo",
          "Make this night shot look like daytime", "Boost the lighting in the scene",
          "Remove the darkness from the image", "Raise the exposure and reduce the noise",
          "Improve the illumination of this picture", "Make the dark areas visible",
          "Turn up the light in this photo", "Restore normal brightness", "This photo is too dark, please fix it",
          "Enhance the visibility of this underlit scene", "Brighten the scene and clean up the grain",
          "Give this dim picture proper lighting", "Lift the shadows in this image",
          "Make the picture look well exposed"}},
        {"haze",
         {"Improve the visibility of the image by reducing haze", "Remove the haze from this photo",
          "Dehaze the image", "Clear up the foggy picture", "Get rid of the fog", "Make the scene less hazy",
          "Remove the mist from the picture", "Restore contrast lost to haze", "Clean the smog out of the image",
          "Make the distant objects clearer", "Cut through the haze in this photo",
          "Reduce the atmospheric haze", "Sharpen the view by removing the fog",
          "Eliminate the milky haze over the scene", "Restore the clarity of this hazy landscape",
          "Take away the fog and bring back the colors", "Clear the air in this picture",
          "Remove the grey veil from the image", "Dehaze this picture and recover the details",
          "Make this hazy photo crisp", "Lift the fog from the scene", "Undo the haze effect"}},
        {"snow",
         {"Remove the snow from the image", "Get rid of the falling snowflakes", "Clean the snow out of this photo",
          "Erase the snowflakes", "Make the picture free of snow", "Remove the snowfall",
          "Take away the flakes covering the scene", "Desnow this image", "Clear the snow streaks",
          "Remove the white specks of snow", "Delete the snow particles from the picture",
          "Restore the scene behind the snow", "Wipe the snowflakes off the photo",
          "Make it look like it is not snowing", "Remove the blizzard from the image",
          "Clean up the snowy noise", "Erase the falling snow and keep the scene",
          "Get the snow out of the way", "Remove all the snow spots", "Undo the snowfall in this photo",
          "Clear away the drifting flakes", "Remove the snow overlay"}},
        {"watermark",
         {"Remove the watermark", "Get rid of the text overlay", "Erase the watermark from the photo",
          "Delete the stamped text", "Clean the watermark off the image", "Remove the logo text on top",
          "Take out the semi transparent text", "Make the image free of watermarks", "Strip the watermark",
          "Remove the copyright text", "Erase the repeated lettering", "Delete the overlay pattern",
          "Remove the printed marks on the picture", "Clear the watermark pattern",
          "Get the text off this photo", "Wipe out the watermark", "Remove the faint letters across the image",
          "Clean up the stamped watermark", "Undo the watermark overlay", "Remove the tiled text",
          "Take the watermark away", "Erase the branding text"}},
        {"colorization",
         {"Colorize this photo", "Add color to the black and white image", "Make this grayscale picture colorful",
          "Restore the colors of the image", "Turn this monochrome photo into color", "Bring color back to the scene",
          "Paint this gray image with natural colors", "Give the picture realistic colors",
          "Convert the black and white photo to color", "Add natural colors", "Recolor this old photo",
          "Fill the image with color", "Colorize the grayscale scene", "Make the photo look like it was shot in color",
          "Add vivid colors to this picture", "Restore the original colors", "Put color into the monochrome image",
          "Color this black and white scene", "Bring this gray photo to life with color",
          "Give this image its colors back", "Add color to every object", "Colorize the picture"}},
        {"superres",
         {"Increase the resolution of the image", "Make the image sharper", "Upscale this blurry photo",
          "Enhance the details of this low resolution picture", "Remove the pixelation", "Sharpen the image",
          "Make this photo high resolution", "Restore the fine details", "Deblur the pixelated picture",
          "Improve the clarity of the image", "Super resolve this photo", "Recover the lost detail",
          "Make the edges crisp", "Fix the blocky image", "Enhance the resolution", "Turn this into a sharp photo",
          "Get rid of the blockiness", "Make the small image look detailed", "Refine the blurry details",
          "Increase the sharpness and detail", "Upsample and sharpen this image", "Clean up the low quality image"}},
        {"removal",
         {"Remove the {object}", "Delete the {object} from the picture", "Take the {object} out of the image",
          "Erase the {object}", "Get rid of the {object}", "Make the {object} disappear",
          "Remove the {object} from the scene", "Clear the {object} away", "Take away the {object}",
          "Wipe the {object} out of the photo", "Cut the {object} from the image", "Eliminate the {object}",
          "Leave out the {object}", "Lose the {object}", "Drop the {object} from the scene",
          "Remove the {object} in the foreground", "Hide the {object}", "Take out the {object}",
          "Make the picture without the {object}", "Delete the {object}", "Get the {object} out of the photo",
          "Erase the {object} from the picture"}},
        {"creation",
         {"Add a {object}", "Insert a {object} into the picture", "Put a {object} in the image",
          "Draw a {object}", "Place a {object} in the scene", "Make a {object} appear",
          "Add a {object} to the scene", "Bring a {object} into the picture", "Put a {object} back",
          "Paint a {object} into the photo", "Paste a {object} into the image", "Create a {object}",
          "Include a {object}", "Give the scene a {object}", "Add a {object} to the scene please",
          "Add a {object} in the foreground", "Show a {object}", "Put in a {object}",
          "Make the picture with a {object}", "Insert a {object}", "Get a {object} into the photo",
          "Draw a {object} into the picture"}},
    };
    return kPools;
}

}  // namespace

const std::vector<std::string>& instruction_templates(std::string_view task) {
    const auto& p = pools();
    const auto it = p.find(task);
    if (it == p.end()) throw std::invalid_argument("no instruction templates for task '" + std::string(task) + "'");
    return it->second;
}

const std::vector<std::string>& ambiguous_prompts() {
    // Placeholder strings standing in for unpublished originals.
    static const std::vector<std::string> kAmbiguous = {"Fix this image", "Make it better", "Improve this photo",
                                                        "Clean up the picture", "Restore the image"};
    return kAmbiguous;
}

const std::vector<std::string>& object_names() {
    static const std::vector<std::string> kObjects = {"ball", "box", "kite", "star", "ring", "block"};
    return kObjects;
}

std::string render_template(std::string_view task, std::size_t index, std::string_view object) {
    const auto& pool = instruction_templates(task);
    if (index >= pool.size()) throw std::out_of_range("template index out of range");
    std::string text = pool[index];
    const std::string key = "{object}";
    for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + object.size())) {
        text.replace(pos, key.size(), object);
    }
    return text;
}

InstructionDraw draw_instruction(std::string_view task, Prng& prng, std::string_view object) {
    if (task == "removal" || task == "creation") {
        const std::size_t idx = prng.below(instruction_templates(task).size());
        return {render_template(task, idx, object), false, idx};
    }
    const std::vector<std::string> parts = split_task(task);
    for (const std::string& p : parts) {
        if (!is_degradation_task(p)) throw std::invalid_argument("unknown task '" + p + "'");
    }
    if (prng.bernoulli(kAmbiguousProbability)) {
        const auto& amb = ambiguous_prompts();
        return {amb[prng.below(amb.size())], true, 0};
    }
    InstructionDraw d;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& pool = instruction_templates(parts[k]);
        const std::size_t idx = prng.below(pool.size());
        if (k == 0) {
            d.text = pool[idx];
            d.template_index = idx;
        } else {
            std::string next = pool[idx];
            next[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(next[0])));
            d.text += " and " + next;
        }
    }
    return d;
}

std::string gen_instruction(std::string_view task, Prng& prng, std::string_view object) {
    return draw_instruction(task, prng, object).text;
}

}  // namespace hfdiff
